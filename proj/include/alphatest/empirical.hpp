#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "alphatest/csv_io.hpp"
#include "alphatest/error.hpp"
#include "alphatest/mc_lab.hpp"
#include "alphatest/parallel.hpp"
#include "alphatest/pipeline.hpp"
#include "alphatest/random.hpp"
#include "alphatest/version.hpp"

namespace alphatest {

/// Column set of the real-data table.
inline const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols{"PY", "MAX", "COM", "AT(5)", "AT(10)", "AT(30)", "FLY"};
    return cols;
}

struct RollingConfig {
    Index window_length = 96;
    Index step = 1;
    double C = 1.0;
    double rho = -1.0;
    std::vector<Index> adaptive_bounds{5, 10, 30};
    Index B = 1000;
    std::uint64_t seed = 1;
    double level = 0.05;
    std::size_t threads = 1;
};

struct ReportRow {
    std::string window_end;
    Index n_used = 0;
    std::vector<double> p_values;  // aligned with ReportDocument::columns
};

struct ReportDocument {
    std::map<std::string, std::string> header;  // seed, B, K, C, rho, level, version, ...
    std::vector<std::string> columns;
    std::vector<ReportRow> rows;
};

inline PipelineConfig pipeline_from(const RollingConfig& cfg) {
    PipelineConfig p;
    p.screening_c = cfg.C;
    p.rho = cfg.rho;
    p.adaptive_bounds = cfg.adaptive_bounds;
    p.B = cfg.B;
    p.level = cfg.level;
    p.threads = cfg.threads;
    return p;
}

inline std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Window w covers periods [w_end - T + 1, w_end]; each window gets the
/// bootstrap seed derive_seed(seed, w).
inline ReportDocument rolling_test(const io::RawData& raw, const RollingConfig& cfg) {
    const Index r = raw.factors.rows();
    if (cfg.window_length < r + 6) fail(ErrorCode::InvalidArgument, "window length must be at least r + 6");
    if (cfg.step < 1) fail(ErrorCode::InvalidArgument, "step must be positive");
    const Index total = raw.returns.cols();
    if (total < cfg.window_length) {
        fail(ErrorCode::InsufficientSample, "sample has " + std::to_string(total) + " periods, fewer than one window");
    }

    ReportDocument doc;
    std::string bounds;
    for (Index k : cfg.adaptive_bounds) bounds += (bounds.empty() ? "" : ";") + std::to_string(k);
    doc.header = {{"tool", "alphatest rolling"},
                  {"version", std::string(kVersion)},
                  {"seed", std::to_string(cfg.seed)},
                  {"B", std::to_string(cfg.B)},
                  {"K", bounds},
                  {"C", format_real(cfg.C)},
                  {"rho", format_real(cfg.rho)},
                  {"level", format_real(cfg.level)},
                  {"window", std::to_string(cfg.window_length)},
                  {"step", std::to_string(cfg.step)}};
    doc.columns = {"PY", "MAX", "COM"};
    for (Index k : cfg.adaptive_bounds) doc.columns.push_back(adaptive_name(k));
    doc.columns.push_back("FLY");

    Index w = 0;
    for (Index end = cfg.window_length; end <= total; end += cfg.step, ++w) {
        const Index begin = end - cfg.window_length;
        PanelData panel = io::window_panel(raw, begin, end);
        const std::string end_label = raw.dates[static_cast<std::size_t>(end - 1)];
        if (panel.n_assets() < 2) {
            warn("window ending " + end_label + " has fewer than 2 complete assets; skipped");
            continue;
        }
        PipelineConfig p = pipeline_from(cfg);
        for (Index& k : p.adaptive_bounds) {
            if (k > panel.n_assets()) {
                warn("window ending " + end_label + ": K = " + std::to_string(k) + " exceeds N, using N");
                k = panel.n_assets();
            }
        }
        const PanelTestReport rep = run_tests(panel, p, SeedSpec{derive_seed(cfg.seed, static_cast<std::uint64_t>(w)), 0});
        ReportRow row;
        row.window_end = end_label;
        row.n_used = panel.n_assets();
        row.p_values = {rep.outcome("PY").p_value, rep.outcome("MAX").p_value, rep.outcome("COM").p_value};
        for (Index k : p.adaptive_bounds) row.p_values.push_back(rep.outcome(adaptive_name(k)).p_value);
        row.p_values.push_back(rep.outcome("FLY").p_value);
        doc.rows.push_back(std::move(row));
    }
    return doc;
}

inline ReportDocument rolling_test(const io::DataSetManifest& manifest, const RollingConfig& cfg) {
    return rolling_test(io::load(manifest), cfg);
}

// ---------------------------------------------------------------------------
// Bootstrap-mimicking study

enum class MimicMode { S1, S2 };

struct MimicOptions {
    std::vector<std::string> tests{"PY", "MAX", "COM", "AT(5)", "AT(10)", "AT(30)", "FLY"};
    Index replications = 1000;
    Index B = 1000;
    std::uint64_t seed = 1;
    double level = 0.05;
    PipelineConfig pipeline;
    std::size_t threads = 0;
    std::optional<Vector> injected_alpha;  // S2 only: replaces the screened alpha
    double max_failure_fraction = 0.01;
};

/// The alpha used to generate S2 data: alpha_hat on the screening set, else 0.
inline Vector mimic_alpha(const PanelData& window, const FactorFit& fit, double c = 1.0) {
    const ScreeningSet s = screen(fit, window.n_periods(), c);
    Vector alpha = Vector::Zero(fit.alpha_hat.size());
    for (Index i : s.indices) alpha(i) = fit.alpha_hat(i);
    return alpha;
}

/// Y*_t = alpha + beta_hat X_t + e_t u_hat_t with one Rademacher sign e_t per period.
inline PanelData mimic_panel(const PanelData& window, const FactorFit& fit, const Vector& alpha, RandomStream& rng) {
    const Index t = window.n_periods();
    Matrix y = fit.beta_hat * window.factors;
    y.colwise() += alpha;
    for (Index s = 0; s < t; ++s) y.col(s) += rng.rademacher() * fit.residuals.col(s);
    PanelData p{std::move(y), window.factors, window.asset_ids, window.period_ids};
    return p;
}

inline mc::RejectionReport mimic_study(const PanelData& window, MimicMode mode, const MimicOptions& opt) {
    validate(window);
    if (opt.replications < 1) fail(ErrorCode::InvalidArgument, "replications must be positive");
    const FactorFit fit = fit_ols(window);
    Vector alpha = Vector::Zero(window.n_assets());
    std::string design = "S1";
    if (mode == MimicMode::S2) {
        design = "S2";
        alpha = opt.injected_alpha ? *opt.injected_alpha : mimic_alpha(window, fit, opt.pipeline.screening_c);
        if (alpha.size() != window.n_assets()) fail(ErrorCode::InvalidArgument, "injected alpha has the wrong length");
        if ((alpha.array() == 0.0).all()) {
            warn("S2: the screening set is empty; the study reduces to S1");
            design = "S2=S1";
        }
    }

    PipelineConfig cfg = opt.pipeline;
    cfg.B = opt.B;
    cfg.level = opt.level;
    cfg.threads = 1;
    cfg = mc::pipeline_for_tests(opt.tests, cfg);

    const std::size_t n_tests = opt.tests.size();
    const auto reps = static_cast<std::size_t>(opt.replications);
    std::vector<int> decisions(reps * n_tests, -1);
    parallel_for(reps, opt.threads, [&](std::size_t r) {
        const std::uint64_t rep_seed = derive_seed(opt.seed, r);
        try {
            RandomStream rng(rep_seed, 0);
            const PanelData panel = mimic_panel(window, fit, alpha, rng);
            const PanelTestReport res = run_tests(panel, cfg, SeedSpec{derive_seed(rep_seed, 2), 0});
            RandomStream coin(rep_seed, 3);
            for (std::size_t k = 0; k < n_tests; ++k) {
                const bool reject =
                    opt.tests[k] == "COIN" ? coin.uniform() < opt.level : res.outcome(opt.tests[k]).decision;
                decisions[r * n_tests + k] = reject ? 1 : 0;
            }
        } catch (const Error& e) {
            warn("mimic replicate " + std::to_string(r) + " failed: " + e.what());
        }
    });

    Index failures = 0;
    for (std::size_t r = 0; r < reps; ++r) failures += decisions[r * n_tests] < 0 ? 1 : 0;
    if (static_cast<double>(failures) > opt.max_failure_fraction * static_cast<double>(reps)) {
        fail(ErrorCode::ExperimentInvalid,
             std::to_string(failures) + " of " + std::to_string(reps) + " mimic replications failed");
    }
    mc::RejectionReport report;
    for (std::size_t k = 0; k < n_tests; ++k) {
        Index ok = 0, rejected = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const int d = decisions[r * n_tests + k];
            if (d >= 0) {
                ++ok;
                rejected += d;
            }
        }
        mc::RejectionRow row;
        row.test = opt.tests[k];
        row.design = design;
        row.n_assets = window.n_assets();
        row.n_periods = window.n_periods();
        row.rate = ok > 0 ? static_cast<double>(rejected) / static_cast<double>(ok) : 0.0;
        row.replications = ok;
        row.B = opt.B;
        row.seed = opt.seed;
        row.failures = failures;
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace alphatest
