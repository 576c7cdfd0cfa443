#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "alphatest/benchmarks.hpp"
#include "alphatest/model.hpp"
#include "alphatest/null_sim.hpp"
#include "alphatest/precision.hpp"
#include "alphatest/statistics.hpp"

namespace alphatest {

/// Knobs for one full run of the adaptive test and the benchmarks on a panel.
struct PipelineConfig {
    double screening_c = 1.0;
    double rho = -1.0;        // < 0: rho_scale * sqrt(log N / T)
    double rho_scale = kDefaultPenaltyScale;
    GlassoOptions glasso;
    std::vector<Index> adaptive_bounds{5, 10, 30};  // reported as AT(K)
    std::vector<Index> fixed_ks;                    // reported as G(k)
    Index B = 1000;
    double level = 0.05;
    double threshold_scale = 2.0;
    MultiplierLaw law = MultiplierLaw::normal;
    bool benchmarks = true;
    std::size_t threads = 1;
};

inline std::string adaptive_name(Index big_k) { return "AT(" + std::to_string(big_k) + ")"; }
inline std::string fixed_name(Index k) { return "G(" + std::to_string(k) + ")"; }

struct PanelTestReport {
    FactorFit fit;
    ScreeningSet screening;
    PrecisionEstimate precision;
    NullTable table;
    Vector observed;  // G~_T(k), k = 1..K of the table
    std::vector<AdaptiveValue> adaptive;
    std::vector<TestOutcome> outcomes;

    const TestOutcome& outcome(const std::string& name) const {
        for (const auto& o : outcomes) {
            if (o.test_name == name) return o;
        }
        fail(ErrorCode::InvalidArgument, "no test named " + name + " in this report");
    }
    bool has(const std::string& name) const {
        return std::any_of(outcomes.begin(), outcomes.end(), [&](const auto& o) { return o.test_name == name; });
    }
};

inline TestOutcome outcome_from(const CompetingResult& r, double level, double critical) {
    TestOutcome o;
    o.test_name = to_string(r.test_name);
    o.statistic = r.statistic;
    o.p_value = r.p_value;
    o.level = level;
    o.critical_value = critical;
    o.decision = r.rejects(level);
    return o;
}

/// Level-alpha cut-off of the MAX statistic under the Gumbel limit.
inline double max_critical_value(Index n_assets, double level) {
    if (n_assets < 2) return std::numeric_limits<double>::quiet_NaN();
    const double logn = std::log(static_cast<double>(n_assets));
    const double x = -2.0 * std::log(-std::sqrt(std::numbers::pi) * std::log(1.0 - level));
    return x + 2.0 * logn - std::log(logn);
}

/// Fit, screen, estimate the precision, simulate the null, and calibrate
/// every requested statistic. Benchmarks are appended when enabled.
inline PanelTestReport run_tests(const PanelData& panel, const PipelineConfig& cfg, const SeedSpec& seed) {
    validate(panel);
    const Index n = panel.n_assets();
    const Index t = panel.n_periods();
    const Index r = panel.n_factors();

    Index table_k = 1;
    for (Index k : cfg.adaptive_bounds) table_k = std::max(table_k, k);
    for (Index k : cfg.fixed_ks) table_k = std::max(table_k, k);
    if (table_k > n) {
        fail(ErrorCode::InvalidK, "K = " + std::to_string(table_k) + " exceeds the number of assets " +
                                      std::to_string(n));
    }

    PanelTestReport rep;
    rep.fit = fit_ols(panel);
    rep.screening = screen(rep.fit, t, cfg.screening_c);
    const ResidualCovariance cov = screened_covariance(panel, rep.fit, rep.screening);
    const double rho = cfg.rho >= 0.0 ? cfg.rho : default_penalty(n, t, cfg.rho_scale);
    rep.precision = precision(cov, graphical_lasso(cov.r_corr, rho, cfg.glasso));

    NullSimOptions nopt;
    nopt.law = cfg.law;
    nopt.threads = cfg.threads;
    rep.table = build_null_table(panel, rep.fit, rep.precision.gamma_hat, table_k, cfg.B, seed, nopt);

    const ZScores zs = z_scores(rep.fit.alpha_hat, rep.precision.gamma_hat);
    rep.observed = modified_statistics(zs.contributions, table_k, static_cast<double>(t));
    const Vector sd = rep.table.sd();

    for (Index k : cfg.fixed_ks) {
        const Vector col = rep.table.draws.col(k - 1);
        rep.outcomes.push_back(calibrate(rep.observed(k - 1), col, cfg.level, fixed_name(k), k));
    }
    for (Index big_k : cfg.adaptive_bounds) {
        AdaptiveValue av = adaptive_statistic(rep.observed.head(big_k), rep.table.mean, sd);
        const Vector draws = rep.table.adaptive_draws_for(big_k);
        rep.outcomes.push_back(calibrate(av.value, draws, cfg.level, adaptive_name(big_k), big_k));
        rep.adaptive.push_back(std::move(av));
    }

    if (cfg.benchmarks) {
        const TStatVector ts = t_statistics(panel, rep.fit);
        const SharedCorrection corr = shared_corrections(rep.fit, ts);
        const double z_crit = normal_quantile(1.0 - cfg.level);
        const CompetingResult py = test_py(ts, corr, n, t, r);
        const CompetingResult mx = test_max(ts, n, t, r);
        const CompetingResult com = test_com(py, mx);
        const ThresholdedCovariance thr = thresholded_covariance(ts, t, cfg.threshold_scale);
        const CompetingResult fly = test_fly(panel, rep.fit, corr, thr);
        rep.outcomes.push_back(outcome_from(py, cfg.level, z_crit));
        rep.outcomes.push_back(outcome_from(mx, cfg.level, max_critical_value(n, cfg.level)));
        rep.outcomes.push_back(outcome_from(com, cfg.level, cfg.level / 2.0));
        rep.outcomes.push_back(outcome_from(fly, cfg.level, z_crit));
    }
    return rep;
}

}  // namespace alphatest
