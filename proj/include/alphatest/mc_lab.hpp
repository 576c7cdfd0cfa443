#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "alphatest/error.hpp"
#include "alphatest/linalg.hpp"
#include "alphatest/model.hpp"
#include "alphatest/parallel.hpp"
#include "alphatest/pipeline.hpp"
#include "alphatest/random.hpp"

namespace alphatest::mc {

// ---------------------------------------------------------------------------
// Factors: AR(1) means with GARCH(1,1) variances

struct GarchCoefficients {
    double c = 0.0;      // intercept of the mean equation
    double phi = 0.0;    // AR coefficient
    double omega = 0.0;  // variance intercept
    double b = 0.0;      // loading on h_{t-1}
    double a = 0.0;      // loading on h_{t-1} zeta_{t-1}^2
};

struct FactorGarchSpec {
    std::vector<GarchCoefficients> factors{
        {0.53, 0.06, 0.89, 0.85, 0.11},  // market
        {0.19, 0.19, 0.62, 0.74, 0.19},  // SMB
        {0.19, 0.05, 0.80, 0.76, 0.15},  // HML
    };
    int burn_in = 50;
    double x_init = 0.0;
    double h_init = 1.0;
};

using InnovationSource = std::function<double()>;

/// Runs the recursion from t = -burn_in + 1 to T starting at (x_init, h_init)
/// and keeps t = 1..T. Factor j consumes burn_in + T + 1 innovations in order
/// (the first plays zeta at the initial time).
inline Matrix simulate_factors(const FactorGarchSpec& spec, Index n_periods, const InnovationSource& zeta) {
    if (n_periods < 1) fail(ErrorCode::InvalidArgument, "T must be positive");
    const auto r = static_cast<Index>(spec.factors.size());
    Matrix out(r, n_periods);
    for (Index j = 0; j < r; ++j) {
        const auto& g = spec.factors[static_cast<std::size_t>(j)];
        double x = spec.x_init;
        double h = spec.h_init;
        double zeta_prev = zeta();
        for (Index step = 0; step < spec.burn_in + n_periods; ++step) {
            h = g.omega + g.b * h + g.a * h * zeta_prev * zeta_prev;
            const double z = zeta();
            x = g.c + g.phi * x + std::sqrt(h) * z;
            zeta_prev = z;
            if (step >= spec.burn_in) out(j, step - spec.burn_in) = x;
        }
    }
    return out;
}

inline Matrix simulate_factors(const FactorGarchSpec& spec, Index n_periods, RandomStream& rng) {
    return simulate_factors(spec, n_periods, [&rng] { return rng.normal(); });
}

// ---------------------------------------------------------------------------
// Idiosyncratic errors

enum class ErrorFamily { gaussian, student_t3, arch };
enum class Innovation { normal, t3 };

struct ErrorSpec {
    ErrorFamily family = ErrorFamily::gaussian;
    Innovation innovation = Innovation::normal;  // arch family only
    double gamma0_lo = 0.25, gamma0_hi = 0.5;
    double gamma1_lo = 0.0, gamma1_hi = 0.5;
    int arch_burn_in = 50;
};

/// N x T matrix of standardised shocks epsilon_t.
inline Matrix draw_shocks(const ErrorSpec& spec, Index n_assets, Index n_periods, RandomStream& rng) {
    Matrix eps(n_assets, n_periods);
    auto innovation = [&](Innovation kind) { return kind == Innovation::normal ? rng.normal() : rng.student_t3_unit(); };
    switch (spec.family) {
        case ErrorFamily::gaussian:
            for (Index t = 0; t < n_periods; ++t)
                for (Index i = 0; i < n_assets; ++i) eps(i, t) = rng.normal();
            break;
        case ErrorFamily::student_t3:
            for (Index t = 0; t < n_periods; ++t)
                for (Index i = 0; i < n_assets; ++i) eps(i, t) = rng.student_t3_unit();
            break;
        case ErrorFamily::arch:
            for (Index i = 0; i < n_assets; ++i) {
                const double g0 = rng.uniform(spec.gamma0_lo, spec.gamma0_hi);
                const double g1 = rng.uniform(spec.gamma1_lo, spec.gamma1_hi);
                double prev = 0.0;
                for (Index step = 0; step < spec.arch_burn_in + n_periods; ++step) {
                    const double sigma = std::sqrt(g0 + g1 * prev * prev);
                    prev = sigma * innovation(spec.innovation);
                    if (step >= spec.arch_burn_in) eps(i, step - spec.arch_burn_in) = prev;
                }
            }
            break;
    }
    return eps;
}

// ---------------------------------------------------------------------------
// Error covariance designs

enum class CovarianceCase { case1, case2, ar1 };

struct CovarianceSpec {
    CovarianceCase kind = CovarianceCase::case1;
    double delta_gamma = 0.25;
    double ar1_rho = 0.6;
    double case2_rho = 0.5;
    std::optional<Vector> loading_override;  // case1 b (or case2 loadings) for fixtures
};

/// floor(N^delta), guarded against pow() landing just below an integer.
inline Index floor_power(Index n, double delta) {
    return static_cast<Index>(std::floor(std::pow(static_cast<double>(n), delta) + 1e-9));
}

inline Matrix case2_spatial_weights(Index n) {
    Matrix w = Matrix::Zero(n, n);
    for (Index i = 1; i <= n - 2; ++i) w(i, i - 1) = 0.5;  // w_{i+1,i}
    for (Index j = 3; j <= n; ++j) w(j - 2, j - 1) = 0.5;  // w_{j-1,j}
    w(0, 1) = 1.0;
    w(n - 1, n - 2) = 1.0;
    return w;
}

inline Matrix build_covariance(const CovarianceSpec& spec, Index n, RandomStream& rng) {
    Matrix sigma;
    switch (spec.kind) {
        case CovarianceCase::ar1: {
            sigma.resize(n, n);
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j)
                    sigma(i, j) = std::pow(spec.ar1_rho, static_cast<double>(std::abs(i - j)));
            break;
        }
        case CovarianceCase::case1: {
            Vector b = Vector::Zero(n);
            if (spec.loading_override) {
                b = *spec.loading_override;
            } else {
                const Index m = std::min(floor_power(n, spec.delta_gamma), n);
                for (Index i = 0; i < m; ++i) b(i) = rng.uniform(0.7, 0.9);
                for (Index i = 0; i < m; ++i) b(n - 1 - i) = rng.uniform(0.7, 0.9);
            }
            Vector lambda(n);
            for (Index i = 0; i < n; ++i) lambda(i) = rng.uniform(1.0, 2.0);
            Matrix r = Matrix::Identity(n, n) + b * b.transpose();
            r.diagonal() -= b.cwiseProduct(b);
            const Vector root = lambda.cwiseSqrt();
            sigma = root.asDiagonal() * r * root.asDiagonal();
            break;
        }
        case CovarianceCase::case2: {
            if (n < 4) fail(ErrorCode::InvalidArgument, "case 2 covariance needs N >= 4");
            Vector l = Vector::Zero(n);
            if (spec.loading_override) {
                l = *spec.loading_override;
            } else {
                const Index m = std::min(floor_power(n, spec.delta_gamma), n);
                for (Index i = 0; i < m; ++i) l(i) = rng.uniform(0.7, 0.9);
            }
            const Matrix a = Matrix::Identity(n, n) - spec.case2_rho * case2_spatial_weights(n);
            const Matrix a_inv = a.partialPivLu().inverse();
            sigma = l * l.transpose() + a_inv * a_inv.transpose();
            break;
        }
    }
    sigma = 0.5 * (sigma + sigma.transpose());
    if (!linalg::is_positive_definite(sigma)) {
        linalg::floor_eigenvalues(sigma);
        warn("generated error covariance was not positive definite; eigenvalues floored");
    }
    return sigma;
}

// ---------------------------------------------------------------------------
// Alternatives

enum class ScenarioKind { null, s1, s2, fig1 };

struct AlphaScenario {
    ScenarioKind kind = ScenarioKind::null;
    Index k = 1;  // fig1 only; s1/s2 derive k from N
};

inline Index scenario_sparsity(const AlphaScenario& s, Index n) {
    switch (s.kind) {
        case ScenarioKind::null: return 0;
        case ScenarioKind::s1: return floor_power(n, 0.25);
        case ScenarioKind::s2: return floor_power(n, 1.0 / 3.0);
        case ScenarioKind::fig1: return s.k;
    }
    return 0;
}

/// Positions and signs come from `rng`; `signal` only rescales, so the same
/// stream gives nested alternatives across a signal grid.
inline Vector generate_alpha(const AlphaScenario& s, double signal, Index n, Index t, RandomStream& rng) {
    Vector alpha = Vector::Zero(n);
    const Index k = scenario_sparsity(s, n);
    if (k == 0) return alpha;
    if (k > n) fail(ErrorCode::InvalidArgument, "alpha sparsity exceeds N");
    const double logn = std::log(static_cast<double>(n));
    const double td = static_cast<double>(t);
    const double magnitude = s.kind == ScenarioKind::fig1 ? std::sqrt(signal * logn / td)
                                                          : std::sqrt(2.0 * signal * logn / td);
    for (std::size_t pos : rng.sample_without_replacement(static_cast<std::size_t>(n), static_cast<std::size_t>(k))) {
        const double w = s.kind == ScenarioKind::s1 ? rng.uniform() : rng.rademacher();
        alpha(static_cast<Index>(pos)) = w * magnitude;
    }
    return alpha;
}

// ---------------------------------------------------------------------------
// Panels

struct BetaLaw {
    std::vector<std::pair<double, double>> ranges{{0.2, 2.0}, {-1.0, 1.5}, {-1.5, 1.5}};
};

inline Matrix draw_betas(const BetaLaw& law, Index n, RandomStream& rng) {
    const auto r = static_cast<Index>(law.ranges.size());
    Matrix beta(n, r);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < r; ++j) {
            const auto [lo, hi] = law.ranges[static_cast<std::size_t>(j)];
            beta(i, j) = rng.uniform(lo, hi);
        }
    return beta;
}

/// Y = alpha 1' + beta X + Sigma^{1/2} epsilon, with the symmetric root.
inline PanelData generate_panel_from_root(const Matrix& covariance_root, const ErrorSpec& errors,
                                          const FactorGarchSpec& factor_spec, const Vector& alpha,
                                          const Matrix& beta, Index t, RandomStream& rng) {
    const Index n = covariance_root.rows();
    if (alpha.size() != n || beta.rows() != n || beta.cols() != static_cast<Index>(factor_spec.factors.size())) {
        fail(ErrorCode::InvalidArgument, "inconsistent shapes for panel generation");
    }
    Matrix x = simulate_factors(factor_spec, t, rng);
    const Matrix eps = draw_shocks(errors, n, t, rng);
    Matrix y = beta * x + covariance_root * eps;
    y.colwise() += alpha;
    return PanelData{std::move(y), std::move(x), {}, {}};
}

inline PanelData generate_panel(const Matrix& covariance, const ErrorSpec& errors, const FactorGarchSpec& factor_spec,
                                const Vector& alpha, const BetaLaw& beta_law, Index n, Index t, RandomStream& rng) {
    if (covariance.rows() != n || covariance.cols() != n) fail(ErrorCode::InvalidArgument, "covariance is not N x N");
    const Matrix beta = draw_betas(beta_law, n, rng);
    return generate_panel_from_root(linalg::symmetric_sqrt(covariance), errors, factor_spec, alpha, beta, t, rng);
}

// ---------------------------------------------------------------------------
// Experiments

struct Design {
    std::string name = "design";
    CovarianceSpec covariance;
    ErrorSpec errors;
    FactorGarchSpec factors;
    BetaLaw betas;
    AlphaScenario scenario;
    std::vector<double> signals{0.0};  // ignored under the null
    Index n_assets = 100;
    Index n_periods = 100;
    bool redraw_per_replicate = true;  // false: covariance and betas drawn once
};

struct ExperimentOptions {
    std::vector<std::string> tests{"PY", "MAX", "COM", "FLY", "AT(5)"};
    Index replications = 500;
    Index B = 300;
    std::uint64_t seed = 1;
    double level = 0.05;
    PipelineConfig pipeline;  // B, level, bounds and benchmarks are overwritten from the fields above
    std::size_t threads = 0;
    double max_failure_fraction = 0.01;
};

struct RejectionRow {
    std::string test;
    std::string design;
    Index n_assets = 0;
    Index n_periods = 0;
    double signal = std::numeric_limits<double>::quiet_NaN();  // NaN under the null
    double rate = 0.0;
    Index replications = 0;  // successful replications behind `rate`
    Index B = 0;
    std::uint64_t seed = 0;
    Index failures = 0;
};

struct RejectionReport {
    std::vector<RejectionRow> rows;

    const RejectionRow& find(const std::string& test, double signal = std::numeric_limits<double>::quiet_NaN()) const {
        for (const auto& r : rows) {
            const bool same_signal = (std::isnan(signal) && std::isnan(r.signal)) || r.signal == signal;
            if (r.test == test && same_signal) return r;
        }
        fail(ErrorCode::InvalidArgument, "no row for test " + test);
    }
};

/// Parses "AT(K)" / "G(k)" names; returns 0 when the name is not of that form.
inline Index parse_bound(const std::string& name, const std::string& prefix) {
    if (name.size() <= prefix.size() + 2 || name.rfind(prefix + "(", 0) != 0 || name.back() != ')') return 0;
    try {
        return static_cast<Index>(std::stol(name.substr(prefix.size() + 1, name.size() - prefix.size() - 2)));
    } catch (...) {
        return 0;
    }
}

inline bool is_benchmark(const std::string& name) {
    return name == "PY" || name == "MAX" || name == "COM" || name == "FLY";
}

/// Derives the pipeline settings a list of test names needs.
inline PipelineConfig pipeline_for_tests(const std::vector<std::string>& tests, PipelineConfig base) {
    base.adaptive_bounds.clear();
    base.fixed_ks.clear();
    base.benchmarks = false;
    for (const auto& name : tests) {
        if (Index k = parse_bound(name, "AT")) {
            base.adaptive_bounds.push_back(k);
        } else if (Index k2 = parse_bound(name, "G")) {
            base.fixed_ks.push_back(k2);
        } else if (is_benchmark(name)) {
            base.benchmarks = true;
        } else if (name != "COIN") {
            fail(ErrorCode::InvalidArgument, "unknown test name '" + name + "'");
        }
    }
    return base;
}

inline bool needs_pipeline(const PipelineConfig& cfg) {
    return cfg.benchmarks || !cfg.adaptive_bounds.empty() || !cfg.fixed_ks.empty();
}

/// Streams per replicate r: derive_seed(seed, r) keys the data (stream 0),
/// alpha (stream 1), the coin (stream 3) and the bootstrap seed (child 2).
/// The same replicate draws are reused at every signal level.
inline RejectionReport run_experiment(const Design& design, const ExperimentOptions& opt) {
    if (opt.replications < 1) fail(ErrorCode::InvalidArgument, "replications must be positive");
    const Index n = design.n_assets;
    const Index t = design.n_periods;
    PipelineConfig cfg = opt.pipeline;
    cfg.B = opt.B;
    cfg.level = opt.level;
    cfg.threads = 1;
    cfg = pipeline_for_tests(opt.tests, cfg);
    const bool run_pipeline = needs_pipeline(cfg);

    std::vector<double> signals = design.signals;
    if (design.scenario.kind == ScenarioKind::null || signals.empty()) {
        signals = {std::numeric_limits<double>::quiet_NaN()};
    }

    std::optional<Matrix> fixed_root;
    std::optional<Matrix> fixed_beta;
    if (!design.redraw_per_replicate) {
        RandomStream rng(derive_seed(opt.seed, ~std::uint64_t{0}), 0);
        fixed_root = linalg::symmetric_sqrt(build_covariance(design.covariance, n, rng));
        fixed_beta = draw_betas(design.betas, n, rng);
    }

    const std::size_t n_tests = opt.tests.size();
    const auto reps = static_cast<std::size_t>(opt.replications);
    RejectionReport report;

    for (double signal : signals) {
        // decisions[r * n_tests + k]: 1 reject, 0 accept, -1 failed replicate
        std::vector<int> decisions(reps * n_tests, -1);
        parallel_for(reps, opt.threads, [&](std::size_t r) {
            const std::uint64_t rep_seed = derive_seed(opt.seed, r);
            try {
                RandomStream data_rng(rep_seed, 0);
                Matrix root, beta;
                if (fixed_root) {
                    root = *fixed_root;
                    beta = *fixed_beta;
                } else {
                    root = linalg::symmetric_sqrt(build_covariance(design.covariance, n, data_rng));
                    beta = draw_betas(design.betas, n, data_rng);
                }
                RandomStream alpha_rng(rep_seed, 1);
                const Vector alpha = generate_alpha(design.scenario, std::isnan(signal) ? 0.0 : signal, n, t, alpha_rng);
                const PanelData panel =
                    generate_panel_from_root(root, design.errors, design.factors, alpha, beta, t, data_rng);

                PanelTestReport res;
                if (run_pipeline) res = run_tests(panel, cfg, SeedSpec{derive_seed(rep_seed, 2), 0});
                RandomStream coin_rng(rep_seed, 3);
                for (std::size_t k = 0; k < n_tests; ++k) {
                    const auto& name = opt.tests[k];
                    const bool reject =
                        name == "COIN" ? coin_rng.uniform() < opt.level : res.outcome(name).decision;
                    decisions[r * n_tests + k] = reject ? 1 : 0;
                }
            } catch (const Error& e) {
                warn("replicate " + std::to_string(r) + " failed: " + e.what());
            }
        });

        Index failures = 0;
        for (std::size_t r = 0; r < reps; ++r) failures += decisions[r * n_tests] < 0 ? 1 : 0;
        if (static_cast<double>(failures) > opt.max_failure_fraction * static_cast<double>(reps)) {
            fail(ErrorCode::ExperimentInvalid, std::to_string(failures) + " of " + std::to_string(reps) +
                                                   " replications failed in design " + design.name);
        }
        for (std::size_t k = 0; k < n_tests; ++k) {
            Index ok = 0, rejected = 0;
            for (std::size_t r = 0; r < reps; ++r) {
                const int d = decisions[r * n_tests + k];
                if (d >= 0) {
                    ++ok;
                    rejected += d;
                }
            }
            RejectionRow row;
            row.test = opt.tests[k];
            row.design = design.name;
            row.n_assets = n;
            row.n_periods = t;
            row.signal = signal;
            row.rate = ok > 0 ? static_cast<double>(rejected) / static_cast<double>(ok) : 0.0;
            row.replications = ok;
            row.B = opt.B;
            row.seed = opt.seed;
            row.failures = failures;
            report.rows.push_back(row);
        }
    }
    return report;
}

}  // namespace alphatest::mc
