#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "alphatest/error.hpp"
#include "alphatest/linalg.hpp"
#include "alphatest/model.hpp"

namespace alphatest {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

struct PairCorrelation {
    Index i = 0;
    Index j = 0;
    double rho = 0.0;
};

/// Cross-sectional dependence correction shared by the PY and FLY tests.
struct SharedCorrection {
    double rho_tilde_sq = 0.0;
    double varrho = 0.0;  // {Phi^{-1}(1 - p_N / 2)}^2
    double p_n = 0.0;     // 0.1 / (N - 1)
    std::vector<PairCorrelation> pair_correlations;  // pairs passing the threshold
};

inline double inflation_factor(const SharedCorrection& corr, Index n) {
    return 1.0 + static_cast<double>(n - 1) * corr.rho_tilde_sq;
}

inline SharedCorrection shared_corrections(const TStatVector& ts) {
    const Matrix& u = ts.projected_residuals;
    const Index n = u.rows();
    if (n < 2) fail(ErrorCode::InsufficientSample, "the dependence correction needs N >= 2");
    if (ts.dof_residual < 2) fail(ErrorCode::InsufficientSample, "the dependence correction needs T - r - 1 >= 2");

    SharedCorrection out;
    out.p_n = 0.1 / static_cast<double>(n - 1);
    const double root = normal_quantile(1.0 - out.p_n / 2.0);
    out.varrho = root * root;

    const Vector inv_norm = u.rowwise().norm().cwiseInverse();
    const Matrix gram = u * u.transpose();
    const double dof = static_cast<double>(ts.dof_residual);
    double total = 0.0;
    for (Index i = 1; i < n; ++i) {
        for (Index j = 0; j < i; ++j) {
            const double rho = gram(i, j) * inv_norm(i) * inv_norm(j);
            const double sq = rho * rho;
            if (dof * sq >= out.varrho) {
                total += sq;
                out.pair_correlations.push_back({i, j, rho});
            }
        }
    }
    out.rho_tilde_sq = 2.0 * total / (static_cast<double>(n) * static_cast<double>(n - 1));
    return out;
}

/// Overload matching the module contract; the fit is only used for a shape check.
inline SharedCorrection shared_corrections(const FactorFit& fit, const TStatVector& ts) {
    if (fit.alpha_hat.size() != ts.t_sq.size()) fail(ErrorCode::InvalidArgument, "fit and t statistics differ in N");
    return shared_corrections(ts);
}

enum class CompetingTest { FLY, PY, MAX, COM };

inline std::string to_string(CompetingTest t) {
    switch (t) {
        case CompetingTest::FLY: return "FLY";
        case CompetingTest::PY: return "PY";
        case CompetingTest::MAX: return "MAX";
        case CompetingTest::COM: return "COM";
    }
    return "?";
}

struct CompetingResult {
    CompetingTest test_name = CompetingTest::PY;
    double statistic = 0.0;
    double p_value = 1.0;
    std::string reference_distribution;

    bool rejects(double level) const { return p_value < level; }
};

namespace detail {

inline void require_finite_sample(Index n_periods, Index n_factors) {
    if (n_periods <= n_factors + 5) {
        fail(ErrorCode::InsufficientSample, "the finite-sample corrections need T >= r + 6");
    }
}

/// (T-r-1)/(T-r-3) and sqrt(2 (T-r-2)/(T-r-5)).
inline std::pair<double, double> t_moments(Index n_periods, Index n_factors) {
    const double nu = static_cast<double>(n_periods - n_factors - 1);
    return {nu / (nu - 2.0), std::sqrt(2.0 * (nu - 1.0) / (nu - 4.0))};
}

}  // namespace detail

/// Pesaran-Yamagata standardised sum of t_i^2; one-sided upper normal reference.
inline CompetingResult test_py(const TStatVector& ts, const SharedCorrection& corr, Index n_assets,
                               Index n_periods, Index n_factors) {
    detail::require_finite_sample(n_periods, n_factors);
    const auto [mean_t, sd_scale] = detail::t_moments(n_periods, n_factors);
    const double nd = static_cast<double>(n_assets);
    const double numerator = (ts.t_sq.array() - mean_t).sum() / std::sqrt(nd);
    const double denominator = mean_t * sd_scale * std::sqrt(inflation_factor(corr, n_assets));
    CompetingResult out;
    out.test_name = CompetingTest::PY;
    out.statistic = numerator / denominator;
    out.p_value = normal_upper_tail(out.statistic);
    out.reference_distribution = "N(0,1) upper tail";
    return out;
}

/// Gumbel-type limit for the maximum of N squared studentised statistics:
/// P(max - 2 log N + log log N <= x) -> exp(-pi^{-1/2} exp(-x / 2)).
inline double max_statistic_p_value(double statistic, Index n_assets, Index dof) {
    if (n_assets == 1) {
        // One asset: the exact two-sided Student-t tail.
        const boost::math::students_t_distribution<double> dist(static_cast<double>(dof));
        return 2.0 * boost::math::cdf(boost::math::complement(dist, std::sqrt(std::max(statistic, 0.0))));
    }
    const double logn = std::log(static_cast<double>(n_assets));
    const double x = statistic - 2.0 * logn + std::log(logn);
    const double cdf = std::exp(-std::exp(-x / 2.0) / std::sqrt(std::numbers::pi));
    return std::clamp(1.0 - cdf, 0.0, 1.0);
}

inline CompetingResult test_max(const TStatVector& ts, Index n_assets, Index n_periods, Index n_factors) {
    detail::require_finite_sample(n_periods, n_factors);
    if (ts.t_sq.size() != n_assets || n_assets < 1) fail(ErrorCode::InvalidArgument, "t statistics do not match N");
    CompetingResult out;
    out.test_name = CompetingTest::MAX;
    out.statistic = ts.t_sq.maxCoeff();
    out.p_value = max_statistic_p_value(out.statistic, n_assets, ts.dof_residual);
    out.reference_distribution = n_assets == 1 ? "Student t (two-sided)" : "Gumbel limit";
    return out;
}

/// Bonferroni combination of the PY and MAX p-values.
inline CompetingResult test_com(const CompetingResult& py, const CompetingResult& max) {
    CompetingResult out;
    out.test_name = CompetingTest::COM;
    out.statistic = std::min(py.p_value, max.p_value);
    out.p_value = std::min(1.0, 2.0 * out.statistic);
    out.reference_distribution = "Bonferroni(PY, MAX)";
    return out;
}

/// Hard-thresholded residual covariance for the FLY test.
struct ThresholdedCovariance {
    Matrix sigma_thr;
    double threshold_scale = 2.0;  // lambda actually applied
    double requested_scale = 2.0;
    bool repaired = false;
};

namespace detail {

inline Matrix hard_threshold(const Matrix& s, const Vector& diag, double cut_scale) {
    Matrix out = s;
    const Index n = s.rows();
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (i != j && std::abs(s(i, j)) < cut_scale * std::sqrt(diag(i) * diag(j))) out(i, j) = 0.0;
        }
    }
    return out;
}

}  // namespace detail

/// Smallest eigenvalue accepted for the thresholded correlation matrix.
inline constexpr double kThresholdMinEigenvalue = 0.05;

/// Largest factor by which the repair may lower the requested threshold scale.
inline constexpr double kThresholdMaxLowering = 4.0;

/// Base covariance is U U' / (T - r - 1) of the projected residuals; entry
/// (i, j), i != j, survives when |s_ij| >= lambda sqrt(s_ii s_jj log N / T).
/// When the implied correlation matrix has an eigenvalue below
/// min_eigenvalue, lambda moves away from the requested value in 5% steps,
/// trying the higher candidate first at each step, until it is acceptable.
/// Lowering stops at lambda / kThresholdMaxLowering; raising ends at the
/// diagonal matrix, which is always acceptable.
inline ThresholdedCovariance thresholded_covariance(const TStatVector& ts, Index n_periods,
                                                    double threshold_scale = 2.0,
                                                    double min_eigenvalue = kThresholdMinEigenvalue) {
    const Matrix& u = ts.projected_residuals;
    const Index n = u.rows();
    if (ts.dof_residual < 1) fail(ErrorCode::InsufficientSample, "T - r - 1 must be at least 1");
    if (!(threshold_scale >= 0.0)) fail(ErrorCode::InvalidArgument, "threshold scale must be non-negative");
    const Matrix base = (u * u.transpose()) / static_cast<double>(ts.dof_residual);
    const Vector diag = base.diagonal();
    for (Index i = 0; i < n; ++i) {
        if (!(diag(i) > 0.0)) {
            fail(ErrorCode::SingularCovariance, "residual variance of asset " + std::to_string(i) + " is zero");
        }
    }
    const double rate = n > 1 ? std::sqrt(std::log(static_cast<double>(n)) / static_cast<double>(n_periods)) : 0.0;

    ThresholdedCovariance out;
    out.requested_scale = threshold_scale;
    out.threshold_scale = threshold_scale;
    out.sigma_thr = detail::hard_threshold(base, diag, threshold_scale * rate);
    const Vector inv_sd = diag.cwiseSqrt().cwiseInverse();
    auto acceptable = [&](const Matrix& m) {
        const Matrix c = inv_sd.asDiagonal() * m * inv_sd.asDiagonal();
        return Eigen::SelfAdjointEigenSolver<Matrix>(c, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() >= min_eigenvalue;
    };
    if (!acceptable(out.sigma_thr) && rate > 0.0) {
        out.repaired = true;
        const double start = threshold_scale > 0.0 ? threshold_scale : 0.05;
        const double floor_scale = start / kThresholdMaxLowering;
        bool found = false;
        for (int step = 1; !found; ++step) {
            const double factor = std::pow(1.05, step);
            const double up = start * factor;
            const double down = start / factor;
            const bool up_open = up * rate <= 1.0;
            const bool down_open = down >= floor_scale;
            if (!up_open && !down_open) break;
            for (double lambda : {up, down}) {
                if ((lambda == up && !up_open) || (lambda == down && !down_open)) continue;
                Matrix candidate = detail::hard_threshold(base, diag, lambda * rate);
                if (acceptable(candidate)) {
                    out.sigma_thr = std::move(candidate);
                    out.threshold_scale = lambda;
                    found = true;
                    break;
                }
            }
        }
        if (!found) {
            out.threshold_scale = 1.0 / rate;
            out.sigma_thr = detail::hard_threshold(base, diag, 1.0 + 1e-12);
        }
    }
    if (!linalg::is_positive_definite(out.sigma_thr)) {
        linalg::floor_eigenvalues(out.sigma_thr);
        out.repaired = true;
        warn("thresholded covariance was not positive definite; eigenvalues floored at 1e-8");
    }
    return out;
}

/// FLY adjusted Wald statistic with W~ = ((1/T) sum X_t X_t')^{-1} Xbar.
inline CompetingResult test_fly(const PanelData& panel, const FactorFit& fit, const SharedCorrection& corr,
                                const ThresholdedCovariance& thr) {
    const Index n = panel.n_assets();
    const Index t = panel.n_periods();
    const Index r = panel.n_factors();
    detail::require_finite_sample(t, r);
    const double td = static_cast<double>(t);
    const Matrix second_moment = panel.factors * panel.factors.transpose() / td;
    const auto llt_x = linalg::guarded_cholesky(second_moment, "uncentered factor second moment");
    const Vector w_tilde = llt_x.solve(fit.x_bar);

    Eigen::LLT<Matrix> llt(thr.sigma_thr);
    if (llt.info() != Eigen::Success) fail(ErrorCode::SingularCovariance, "thresholded covariance is singular");
    const double quad = fit.alpha_hat.dot(llt.solve(fit.alpha_hat));

    const auto [mean_t, sd_scale] = detail::t_moments(t, r);
    const double nd = static_cast<double>(n);
    const double numerator = td * (1.0 - fit.x_bar.dot(w_tilde)) * quad - nd * mean_t;
    const double denominator = mean_t * sd_scale * std::sqrt(nd * inflation_factor(corr, n));

    CompetingResult out;
    out.test_name = CompetingTest::FLY;
    out.statistic = numerator / denominator;
    out.p_value = normal_upper_tail(out.statistic);
    out.reference_distribution = "N(0,1) upper tail";
    return out;
}

}  // namespace alphatest
