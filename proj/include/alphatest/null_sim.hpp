#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "alphatest/error.hpp"
#include "alphatest/linalg.hpp"
#include "alphatest/model.hpp"
#include "alphatest/parallel.hpp"
#include "alphatest/random.hpp"
#include "alphatest/statistics.hpp"

namespace alphatest {

enum class MultiplierLaw { normal, rademacher };

/// Simulated null draws of G~_T(k), k = 1..K, and of the adaptive statistic.
struct NullTable {
    Matrix draws;           // B x K
    Vector mean;            // K
    Vector var;             // K, divisor B
    Vector adaptive_draws;  // B, standardised by mean/var above
    Index B = 0;
    SeedSpec seed;

    Index K() const { return draws.cols(); }
    Vector sd() const { return var.cwiseSqrt(); }

    /// Adaptive draws for a smaller bound K' <= K, reusing the same moments.
    Vector adaptive_draws_for(Index k_bound) const {
        if (k_bound < 1 || k_bound > K()) fail(ErrorCode::InvalidK, "adaptive bound outside the table");
        const Vector s = sd();
        Vector out(B);
        for (Index j = 0; j < B; ++j) {
            double best = -std::numeric_limits<double>::infinity();
            for (Index k = 0; k < k_bound; ++k) best = std::max(best, (draws(j, k) - mean(k)) / s(k));
            out(j) = best;
        }
        return out;
    }
};

struct TestOutcome {
    std::string test_name;
    double statistic = 0.0;
    double critical_value = 0.0;
    double p_value = 1.0;
    double level = 0.05;
    bool decision = false;
    Index k_or_K = 0;
};

/// Precomputes the centred residual columns (Y_t - Ybar) - beta (X_t - Xbar)
/// and the scale T^{-1} sqrt(1 + Xbar' Sigma_X^{-1} Xbar) once per fit.
class MultiplierSimulator {
public:
    MultiplierSimulator(const PanelData& panel, const FactorFit& fit)
        : centred_((panel.returns.colwise() - fit.y_bar) -
                   fit.beta_hat * (panel.factors.colwise() - fit.x_bar)),
          scale_(std::sqrt(1.0 + fit.xbar_quadratic()) / static_cast<double>(panel.n_periods())) {}

    Vector z_star(const Vector& multipliers) const {
        if (multipliers.size() != centred_.cols()) {
            fail(ErrorCode::InvalidArgument, "multiplier vector must have length T");
        }
        Vector z(centred_.rows());
        z.noalias() = centred_ * multipliers;
        z *= scale_;
        return z;
    }

    const Matrix& centred() const { return centred_; }
    double scale() const { return scale_; }
    Index n_periods() const { return centred_.cols(); }

private:
    Matrix centred_;
    double scale_;
};

inline Vector simulate_z_star(const PanelData& panel, const FactorFit& fit, const Vector& multipliers) {
    return MultiplierSimulator(panel, fit).z_star(multipliers);
}

/// Replicate j's multipliers come from stream (master_seed, j) only.
inline Vector draw_multipliers(const SeedSpec& seed, std::uint64_t replicate, Index length,
                               MultiplierLaw law = MultiplierLaw::normal) {
    RandomStream rng(seed.master_seed, replicate);
    Vector e(length);
    for (Index t = 0; t < length; ++t) e(t) = law == MultiplierLaw::normal ? rng.normal() : rng.rademacher();
    return e;
}

struct NullSimOptions {
    MultiplierLaw law = MultiplierLaw::normal;
    std::size_t threads = 1;
};

inline NullTable build_null_table(const PanelData& panel, const FactorFit& fit, const Matrix& gamma_hat,
                                  Index big_k, Index n_draws, const SeedSpec& seed,
                                  const NullSimOptions& opt = {}) {
    const Index n = panel.n_assets();
    if (n_draws < 100) fail(ErrorCode::InvalidArgument, "B must be at least 100");
    if (big_k < 1 || big_k > n) fail(ErrorCode::InvalidK, "K must lie in [1, N]");
    if (gamma_hat.rows() != n || gamma_hat.cols() != n) {
        fail(ErrorCode::InvalidArgument, "precision matrix does not match the panel");
    }
    const Vector gamma_diag = gamma_hat.diagonal();
    check_gamma_diagonal(gamma_diag);

    const MultiplierSimulator sim(panel, fit);
    const double td = static_cast<double>(panel.n_periods());

    NullTable table;
    table.B = n_draws;
    table.seed = seed;
    table.draws.resize(n_draws, big_k);

    parallel_for(static_cast<std::size_t>(n_draws), opt.threads, [&](std::size_t j) {
        const Vector e = draw_multipliers(seed, j, panel.n_periods(), opt.law);
        const Vector z = sim.z_star(e);
        Vector g(n);
        g.noalias() = gamma_hat * z;
        const Vector contributions = g.array().square() / gamma_diag.array();
        table.draws.row(static_cast<Index>(j)) = modified_statistics(contributions, big_k, td).transpose();
    });

    table.mean = table.draws.colwise().mean().transpose();
    table.var.resize(big_k);
    for (Index k = 0; k < big_k; ++k) {
        table.var(k) = (table.draws.col(k).array() - table.mean(k)).square().sum() / static_cast<double>(n_draws);
        if (!(table.var(k) > 0.0)) {
            fail(ErrorCode::DegenerateNull, "simulated null variance is zero at k = " + std::to_string(k + 1));
        }
    }
    table.adaptive_draws = table.adaptive_draws_for(big_k);
    return table;
}

/// Critical value = order statistic ceil((1 - level)(B + 1)) clamped to [1, B];
/// p = (1 + #{draw >= statistic}) / (B + 1); reject when statistic > critical value.
inline TestOutcome calibrate(double statistic, std::span<const double> draws, double level,
                             std::string test_name = {}, Index k_or_K = 0) {
    if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::InvalidArgument, "level must lie in (0, 1)");
    if (draws.empty()) fail(ErrorCode::InvalidArgument, "no null draws to calibrate against");
    if (std::isnan(statistic)) fail(ErrorCode::InvalidArgument, "statistic is NaN");
    std::vector<double> sorted(draws.begin(), draws.end());
    std::sort(sorted.begin(), sorted.end());
    const auto b = static_cast<long long>(sorted.size());
    auto rank = static_cast<long long>(std::ceil((1.0 - level) * static_cast<double>(b + 1) - 1e-9));
    rank = std::clamp(rank, 1LL, b);

    TestOutcome out;
    out.test_name = std::move(test_name);
    out.statistic = statistic;
    out.level = level;
    out.k_or_K = k_or_K;
    out.critical_value = sorted[static_cast<std::size_t>(rank - 1)];
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), statistic) - sorted.begin();
    const auto at_or_above = b - below;
    out.p_value = static_cast<double>(1 + at_or_above) / static_cast<double>(b + 1);
    out.decision = statistic > out.critical_value;
    return out;
}

inline TestOutcome calibrate(double statistic, const Vector& draws, double level, std::string test_name = {},
                             Index k_or_K = 0) {
    return calibrate(statistic, std::span<const double>(draws.data(), static_cast<std::size_t>(draws.size())),
                     level, std::move(test_name), k_or_K);
}

}  // namespace alphatest
