#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "alphatest/error.hpp"
#include "alphatest/linalg.hpp"
#include "alphatest/model.hpp"

namespace alphatest {

// ---------------------------------------------------------------------------
// Screening

struct ScreeningSet {
    std::vector<Index> indices;  // ascending
    double threshold_constant = 1.0;
    double delta_nt = 0.0;

    bool contains(Index i) const { return std::binary_search(indices.begin(), indices.end(), i); }
};

/// delta_{N,T} = C log(log T) sqrt(log N).
inline double screening_threshold(Index n_assets, Index n_periods, double c) {
    if (!(c > 0.0)) fail(ErrorCode::InvalidArgument, "screening constant C must be positive");
    if (n_periods <= 3) {
        fail(ErrorCode::InsufficientSample, "screening needs T >= 4 so that log(log T) > 0");
    }
    if (n_assets < 2) fail(ErrorCode::InsufficientSample, "screening needs N >= 2 so that log N > 0");
    return c * std::log(std::log(static_cast<double>(n_periods))) *
           std::sqrt(std::log(static_cast<double>(n_assets)));
}

/// Assets whose |alpha_hat_i| strictly exceeds sigma_hat_i * delta_{N,T}.
inline ScreeningSet screen(const FactorFit& fit, Index n_periods, double c = 1.0) {
    ScreeningSet s;
    s.threshold_constant = c;
    s.delta_nt = screening_threshold(fit.alpha_hat.size(), n_periods, c);
    for (Index i = 0; i < fit.alpha_hat.size(); ++i) {
        if (std::abs(fit.alpha_hat(i)) > std::sqrt(fit.sigma_hat_sq(i)) * s.delta_nt) {
            s.indices.push_back(i);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Screened residual covariance

struct ResidualCovariance {
    Matrix sigma_u;      // U U' / T with U = Y - alpha_tilde 1' - beta X
    Vector v_diag;       // sqrt(diag(sigma_u))
    Matrix r_corr;       // unit-diagonal correlation
    Vector alpha_tilde;  // alpha_hat restricted to the screening set
};

inline ResidualCovariance screened_covariance(const PanelData& panel, const FactorFit& fit,
                                              const ScreeningSet& s) {
    const Index n = panel.n_assets();
    const Index t = panel.n_periods();
    if (fit.alpha_hat.size() != n) fail(ErrorCode::InvalidArgument, "fit does not belong to this panel");

    ResidualCovariance out;
    out.alpha_tilde = Vector::Zero(n);
    for (Index i : s.indices) out.alpha_tilde(i) = fit.alpha_hat(i);

    const Matrix u = panel.returns - out.alpha_tilde * Vector::Ones(t).transpose() -
                     fit.beta_hat * panel.factors;
    out.sigma_u = (u * u.transpose()) / static_cast<double>(t);
    out.sigma_u = 0.5 * (out.sigma_u + out.sigma_u.transpose());
    out.v_diag = out.sigma_u.diagonal().cwiseSqrt();
    for (Index i = 0; i < n; ++i) {
        if (!(out.v_diag(i) > 0.0)) {
            fail(ErrorCode::DegenerateResidual,
                 "asset " + std::to_string(i) + " has zero screened residual variance");
        }
    }
    const Vector inv = out.v_diag.cwiseInverse();
    out.r_corr = inv.asDiagonal() * out.sigma_u * inv.asDiagonal();
    out.r_corr = out.r_corr.cwiseMax(-1.0).cwiseMin(1.0);
    out.r_corr.diagonal().setOnes();
    return out;
}

// ---------------------------------------------------------------------------
// Graphical lasso with the diagonal left unpenalised

struct GlassoOptions {
    double tol = 1e-4;  // mean |change| of off-diagonals per sweep, and KKT bound
    int max_iter = 200;
    double inner_tol = 1e-10;
    int inner_max_iter = 5000;
};

struct PrecisionEstimate {
    Matrix k_rho;
    Matrix gamma_hat;  // empty until precision() is applied
    double penalty = 0.0;
    int solver_iters = 0;
    std::vector<double> objective_trace;  // initial point, then one entry per sweep
    double kkt_residual = 0.0;
    bool repaired = false;
};

inline constexpr double kDefaultPenaltyScale = 1.5;

/// Default penalty c * sqrt(log N / T).
inline double default_penalty(Index n_assets, Index n_periods, double scale = kDefaultPenaltyScale) {
    return scale * std::sqrt(std::log(static_cast<double>(n_assets)) / static_cast<double>(n_periods));
}

/// tr(Psi R) - log det Psi + rho * sum_{i != j} |psi_ij|; +inf when Psi is not PD.
inline double glasso_objective(const Matrix& psi, const Matrix& r_corr, double rho) {
    Eigen::LLT<Matrix> llt(psi);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double l1_off = psi.cwiseAbs().sum() - psi.diagonal().cwiseAbs().sum();
    return (psi.cwiseProduct(r_corr)).sum() - logdet + rho * l1_off;
}

/// Largest violation of the optimality conditions with W = Psi^{-1}:
/// W_ii = R_ii; W_ij = R_ij + rho sign(psi_ij) where psi_ij != 0; |W_ij - R_ij| <= rho otherwise.
inline double glasso_kkt_residual(const Matrix& psi, const Matrix& r_corr, double rho) {
    Eigen::LLT<Matrix> llt(psi);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Index n = psi.rows();
    const Matrix w = llt.solve(Matrix::Identity(n, n));
    double worst = 0.0;
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            const double gap = w(i, j) - r_corr(i, j);
            double v;
            if (i == j) {
                v = std::abs(gap);
            } else if (psi(i, j) != 0.0) {
                v = std::abs(gap - rho * (psi(i, j) > 0.0 ? 1.0 : -1.0));
            } else {
                v = std::max(0.0, std::abs(gap) - rho);
            }
            worst = std::max(worst, v);
        }
    }
    return worst;
}

namespace detail {

inline void check_correlation(const Matrix& r_corr) {
    if (r_corr.rows() != r_corr.cols() || r_corr.rows() < 1) {
        fail(ErrorCode::InvalidArgument, "correlation matrix must be square and non-empty");
    }
    if (!r_corr.allFinite()) fail(ErrorCode::InvalidData, "correlation matrix has non-finite entries");
    if ((r_corr - r_corr.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        fail(ErrorCode::InvalidArgument, "correlation matrix is not symmetric");
    }
    if ((r_corr.diagonal().array() - 1.0).abs().maxCoeff() > 1e-8) {
        fail(ErrorCode::InvalidArgument, "correlation matrix must have a unit diagonal");
    }
}

}  // namespace detail

/// Block coordinate descent on the primal. Updating column j with the rest of
/// Psi fixed reduces to the box QP
///     min_u (s + u)' Psi_11 (s + u)   s.t. |u|_inf <= rho,
/// after which psi_12 = -Psi_11 (s + u) / r_jj and
/// psi_22 = 1 / r_jj + (s + u)' Psi_11 (s + u) / r_jj^2.
/// Each block step is an exact minimisation, so the objective never increases
/// and Psi stays positive definite (its Schur complement is 1 / r_jj).
inline PrecisionEstimate graphical_lasso(const Matrix& r_corr, double rho, const GlassoOptions& opt = {}) {
    detail::check_correlation(r_corr);
    if (!(rho >= 0.0)) fail(ErrorCode::InvalidArgument, "penalty rho must be non-negative");
    const Index n = r_corr.rows();
    if (rho == 0.0 && !linalg::is_positive_definite(r_corr)) {
        fail(ErrorCode::IndefiniteInput, "rho = 0 requires a positive-definite correlation matrix");
    }

    PrecisionEstimate est;
    est.penalty = rho;
    Matrix psi = Matrix::Identity(n, n);
    // Column j of `dual` holds the box-QP variable u for that column.
    Matrix dual = (-r_corr).cwiseMax(-rho).cwiseMin(rho);
    dual.diagonal().setZero();

    est.objective_trace.push_back(glasso_objective(psi, r_corr, rho));

    // Identity satisfies the KKT conditions exactly once rho dominates every off-diagonal.
    if ((r_corr - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() <= rho) {
        est.k_rho = psi;
        est.kkt_residual = glasso_kkt_residual(psi, r_corr, rho);
        return est;
    }

    Vector v(n), g(n);
    double kkt = std::numeric_limits<double>::infinity();

    for (int sweep = 1; sweep <= opt.max_iter; ++sweep) {
        const Matrix before = psi;
        for (Index j = 0; j < n; ++j) {
            const double s22 = r_corr(j, j);
            v = r_corr.col(j) + dual.col(j);
            v(j) = 0.0;
            g.noalias() = psi * v;

            if (rho > 0.0) {
                for (int it = 0; it < opt.inner_max_iter; ++it) {
                    double max_step = 0.0;
                    for (Index k = 0; k < n; ++k) {
                        if (k == j) continue;
                        const double cur = dual(k, j);
                        const double next = std::clamp(cur - g(k) / psi(k, k), -rho, rho);
                        const double step = next - cur;
                        if (step != 0.0) {
                            dual(k, j) = next;
                            v(k) += step;
                            g.noalias() += step * psi.col(k);
                            max_step = std::max(max_step, std::abs(step));
                        }
                    }
                    if (max_step <= opt.inner_tol) break;
                }
            }

            double quad = 0.0;
            for (Index k = 0; k < n; ++k) {
                if (k == j) continue;
                // Interior duals mean a zero gradient, i.e. an exact zero in Psi.
                double gk = g(k);
                if (rho > 0.0 && std::abs(dual(k, j)) < rho) gk = 0.0;
                quad += gk * v(k);
                const double off = -gk / s22;
                psi(k, j) = off;
                psi(j, k) = off;
            }
            psi(j, j) = 1.0 / s22 + quad / (s22 * s22);
        }

        if (!linalg::is_positive_definite(psi)) {
            linalg::floor_eigenvalues(psi);
            est.repaired = true;
            warn("graphical lasso iterate lost positive definiteness; eigenvalues floored at 1e-8");
        }

        double change = 0.0;
        for (Index j = 0; j < n; ++j) {
            for (Index i = 0; i < n; ++i) {
                if (i != j) change += std::abs(psi(i, j) - before(i, j));
            }
        }
        const double mean_change = n > 1 ? change / static_cast<double>(n * (n - 1)) : 0.0;
        est.objective_trace.push_back(glasso_objective(psi, r_corr, rho));
        est.solver_iters = sweep;
        if (mean_change < opt.tol) {
            kkt = glasso_kkt_residual(psi, r_corr, rho);
            if (kkt <= opt.tol) {
                est.k_rho = psi;
                est.kkt_residual = kkt;
                return est;
            }
        }
    }
    kkt = glasso_kkt_residual(psi, r_corr, rho);
    std::ostringstream os;
    os << "graphical lasso did not converge in " << opt.max_iter << " sweeps (KKT residual " << kkt << ")";
    fail(ErrorCode::Unconverged, os.str());
}

/// Gamma_hat = V^{-1} K V^{-1}.
inline Matrix precision_from_correlation(const Vector& v_diag, const Matrix& k_rho) {
    if (k_rho.rows() != v_diag.size() || k_rho.cols() != v_diag.size()) {
        fail(ErrorCode::InvalidArgument, "precision and scale dimensions differ");
    }
    const Vector inv = v_diag.cwiseInverse();
    Matrix gamma = inv.asDiagonal() * k_rho * inv.asDiagonal();
    return 0.5 * (gamma + gamma.transpose());
}

inline PrecisionEstimate precision(const ResidualCovariance& cov, PrecisionEstimate k) {
    k.gamma_hat = precision_from_correlation(cov.v_diag, k.k_rho);
    return k;
}

inline PrecisionEstimate precision(const ResidualCovariance& cov, const Matrix& k_rho) {
    PrecisionEstimate est;
    est.k_rho = k_rho;
    return precision(cov, std::move(est));
}

/// Estimators of the correlation-scale precision K. Only the graphical lasso
/// ships; nodewise regression or CLIME would slot in here.
class PrecisionEstimator {
public:
    virtual ~PrecisionEstimator() = default;
    virtual std::string name() const = 0;
    virtual PrecisionEstimate estimate(const Matrix& r_corr, Index n_periods) const = 0;
};

class GraphicalLassoEstimator final : public PrecisionEstimator {
public:
    /// rho < 0 selects default_penalty(N, T, penalty_scale).
    explicit GraphicalLassoEstimator(double rho = -1.0, double penalty_scale = kDefaultPenaltyScale, GlassoOptions opt = {})
        : rho_(rho), scale_(penalty_scale), opt_(opt) {}

    std::string name() const override { return "glasso"; }

    PrecisionEstimate estimate(const Matrix& r_corr, Index n_periods) const override {
        const double rho = rho_ >= 0.0 ? rho_ : default_penalty(r_corr.rows(), n_periods, scale_);
        return graphical_lasso(r_corr, rho, opt_);
    }

private:
    double rho_;
    double scale_;
    GlassoOptions opt_;
};

}  // namespace alphatest
