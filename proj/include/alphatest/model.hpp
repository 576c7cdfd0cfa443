#pragma once

#include <string>
#include <vector>

#include "alphatest/error.hpp"
#include "alphatest/linalg.hpp"

namespace alphatest {

/// Observed excess returns (N assets x T periods) and factors (r x T).
struct PanelData {
    Matrix returns;
    Matrix factors;
    std::vector<std::string> asset_ids;
    std::vector<std::string> period_ids;

    Index n_assets() const { return returns.rows(); }
    Index n_periods() const { return returns.cols(); }
    Index n_factors() const { return factors.rows(); }
};

/// Structural checks shared by every consumer. The stricter N >= 2 and
/// T >= r + 6 requirements belong to the tests that divide by them.
inline void validate(const PanelData& panel) {
    const Index n = panel.n_assets();
    const Index t = panel.n_periods();
    const Index r = panel.n_factors();
    if (n < 1) fail(ErrorCode::InvalidData, "panel has no assets");
    if (r < 1) fail(ErrorCode::InvalidData, "at least one factor is required (r = 0 given)");
    if (panel.factors.cols() != t) {
        fail(ErrorCode::InvalidData, "returns have " + std::to_string(t) + " periods but factors have " +
                                         std::to_string(panel.factors.cols()));
    }
    if (t < r + 2) {
        fail(ErrorCode::InsufficientSample,
             "need T >= r + 2 periods to fit an intercept and " + std::to_string(r) + " slopes");
    }
    if (!panel.returns.allFinite()) fail(ErrorCode::InvalidData, "returns contain non-finite entries");
    if (!panel.factors.allFinite()) fail(ErrorCode::InvalidData, "factors contain non-finite entries");
    if (!panel.asset_ids.empty() && static_cast<Index>(panel.asset_ids.size()) != n) {
        fail(ErrorCode::InvalidData, "asset_ids length does not match the number of assets");
    }
    if (!panel.period_ids.empty() && static_cast<Index>(panel.period_ids.size()) != t) {
        fail(ErrorCode::InvalidData, "period_ids length does not match the number of periods");
    }
}

inline PanelData make_panel(Matrix returns, Matrix factors, std::vector<std::string> asset_ids = {},
                            std::vector<std::string> period_ids = {}) {
    PanelData p{std::move(returns), std::move(factors), std::move(asset_ids), std::move(period_ids)};
    validate(p);
    return p;
}

/// OLS/MLE quantities of the time-series factor regressions.
struct FactorFit {
    Vector alpha_hat;     // N
    Matrix beta_hat;      // N x r
    Matrix residuals;     // N x T, u_it = y_it - alpha_i - beta_i' X_t
    Vector w_vec;         // Sigma_X^{-1} Xbar (centered second moment)
    Vector sigma_hat_sq;  // estimated variance of alpha_hat_i
    Vector x_bar;
    Vector y_bar;
    Matrix sigma_x_hat;   // T^{-1} sum (X_t - Xbar)(X_t - Xbar)'

    /// Xbar' Sigma_X^{-1} Xbar.
    double xbar_quadratic() const { return x_bar.dot(w_vec); }
};

/// Fits every asset's regression on an intercept and the factors in one pass.
/// The r x r centered Gram matrix is factorised once and shared by all assets.
inline FactorFit fit_ols(const PanelData& panel) {
    validate(panel);
    const Index t = panel.n_periods();
    const double td = static_cast<double>(t);
    const Matrix& y = panel.returns;
    const Matrix& x = panel.factors;

    FactorFit fit;
    fit.x_bar = x.rowwise().mean();
    fit.y_bar = y.rowwise().mean();
    const Matrix xc = x.colwise() - fit.x_bar;
    const Matrix yc = y.colwise() - fit.y_bar;
    const Matrix gram = xc * xc.transpose();
    const auto llt = linalg::guarded_cholesky(gram, "factor sample covariance");

    // beta' = gram^{-1} Xc Yc'
    fit.beta_hat = llt.solve(xc * yc.transpose()).transpose();
    fit.alpha_hat = fit.y_bar - fit.beta_hat * fit.x_bar;
    fit.sigma_x_hat = gram / td;
    fit.w_vec = td * llt.solve(fit.x_bar);

    fit.residuals = yc - fit.beta_hat * xc;
    const double inflation = 1.0 + fit.xbar_quadratic();
    fit.sigma_hat_sq = inflation * fit.residuals.rowwise().squaredNorm() / (td * td);
    return fit;
}

/// Studentised intercepts t_i^2 and the pieces the benchmark tests share.
struct TStatVector {
    Vector t_sq;
    double annihilator_trace = 0.0;  // 1' M_X 1
    Index dof_residual = 0;          // T - r - 1
    /// Rows are U_i = M_X (Y_i - alpha_i 1), M_X the annihilator of the
    /// T x r factor block (no intercept column).
    Matrix projected_residuals;
};

inline TStatVector t_statistics(const PanelData& panel, const FactorFit& fit) {
    validate(panel);
    const Index n = panel.n_assets();
    const Index t = panel.n_periods();
    const Index r = panel.n_factors();
    if (fit.alpha_hat.size() != n || fit.residuals.cols() != t) {
        fail(ErrorCode::InvalidArgument, "fit does not belong to this panel");
    }
    TStatVector out;
    out.dof_residual = t - r - 1;
    if (out.dof_residual < 1) fail(ErrorCode::InsufficientSample, "T - r - 1 must be at least 1");

    // M_X v = v - X' (X X')^{-1} X v; the projector is never formed densely.
    const Matrix& x = panel.factors;
    const auto llt = linalg::guarded_cholesky(x * x.transpose(), "uncentered factor Gram matrix");
    const Matrix proj = llt.solve(x);  // r x T
    const Vector ones = Vector::Ones(t);
    out.annihilator_trace = static_cast<double>(t) - (x * ones).dot(proj * ones);

    const Matrix centred = panel.returns - fit.alpha_hat * ones.transpose();
    out.projected_residuals = centred - (centred * x.transpose()) * proj;

    out.t_sq.resize(n);
    const double dof = static_cast<double>(out.dof_residual);
    for (Index i = 0; i < n; ++i) {
        const double ss = out.projected_residuals.row(i).squaredNorm();
        const double scale = panel.returns.row(i).squaredNorm();
        if (!(ss > 1e-24 * scale) || ss == 0.0) {
            fail(ErrorCode::DegenerateResidual,
                 "asset " + std::to_string(i) + " has zero residual variance");
        }
        const double a = fit.alpha_hat(i);
        out.t_sq(i) = a * a * out.annihilator_trace / (ss / dof);
    }
    return out;
}

}  // namespace alphatest
