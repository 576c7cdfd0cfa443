// Command-line front end: single-panel test, rolling windows, Monte Carlo
// designs and the S1/S2 mimicking study.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "alphatest/alphatest.hpp"

namespace at = alphatest;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct DataFlags {
    std::string returns;
    std::string factors;
    std::string riskfree;
    std::string date_column = "date";
    std::vector<std::string> factor_columns;

    at::io::DataSetManifest manifest() const {
        at::io::DataSetManifest m;
        m.returns_path = returns;
        m.factors_path = factors;
        if (!riskfree.empty()) m.riskfree_path = riskfree;
        m.date_column = date_column;
        m.factor_columns = factor_columns;
        return m;
    }
};

struct TestFlags {
    std::vector<at::Index> ks;
    std::vector<at::Index> big_ks{5, 10, 30};
    at::Index B = 1000;
    std::uint64_t seed = 1;
    double level = 0.05;
    double rho = -1.0;
    double C = 1.0;
    std::size_t threads = 1;
    std::string out;
};

void add_data_flags(CLI::App* app, DataFlags& d) {
    app->add_option("--returns", d.returns, "CSV of asset returns, one column per asset")->required();
    app->add_option("--factors", d.factors, "CSV of factor returns")->required();
    app->add_option("--riskfree", d.riskfree, "CSV with the risk-free rate; subtracted from returns");
    app->add_option("--date-column", d.date_column, "name of the date column")->capture_default_str();
    app->add_option("--factor-columns", d.factor_columns, "factor columns to use (default: all)");
}

void add_test_flags(CLI::App* app, TestFlags& f, bool with_fixed_k) {
    if (with_fixed_k) app->add_option("--k", f.ks, "fixed k values to report as G(k)");
    app->add_option("--K", f.big_ks, "adaptive bounds, reported as AT(K)")->capture_default_str();
    app->add_option("--B", f.B, "null simulation draws")->capture_default_str()->check(CLI::Range(100, 100000000));
    app->add_option("--seed", f.seed, "master seed")->capture_default_str();
    app->add_option("--level", f.level, "significance level")->capture_default_str()->check(CLI::Range(1e-9, 0.999999));
    app->add_option("--rho", f.rho, "glasso penalty; negative selects 1.5 sqrt(log N / T)")->capture_default_str();
    app->add_option("--C", f.C, "screening constant")->capture_default_str();
    app->add_option("--threads", f.threads, "worker threads, 0 = all cores")->capture_default_str();
    app->add_option("--out", f.out, "output CSV (default: stdout)");
}

at::PipelineConfig pipeline_of(const TestFlags& f) {
    at::PipelineConfig p;
    p.screening_c = f.C;
    p.rho = f.rho;
    p.adaptive_bounds = f.big_ks;
    p.fixed_ks = f.ks;
    p.B = f.B;
    p.level = f.level;
    p.threads = f.threads;
    return p;
}

template <class Fn>
void emit(const std::string& path, Fn&& write) {
    if (path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) at::fail(at::ErrorCode::IoError, "cannot write " + path);
    write(out);
}

void write_header(std::ostream& out, const std::string& tool, const TestFlags& f, at::Index n, at::Index t) {
    std::string bounds;
    for (at::Index k : f.big_ks) bounds += (bounds.empty() ? "" : ";") + std::to_string(k);
    out << "# schema=" << at::kReportSchema << "\n# tool=alphatest " << tool << "\n# version=" << at::kVersion
        << "\n# seed=" << f.seed << "\n# B=" << f.B << "\n# K=" << bounds << "\n# C=" << at::format_real(f.C)
        << "\n# rho=" << at::format_real(f.rho) << "\n# level=" << at::format_real(f.level) << "\n# N=" << n
        << "\n# T=" << t << '\n';
}

int run_test(const DataFlags& d, TestFlags f) {
    const at::PanelData panel = at::io::ingest(d.manifest());
    for (at::Index& k : f.big_ks) {
        if (k > panel.n_assets()) {
            at::warn("K = " + std::to_string(k) + " exceeds N = " + std::to_string(panel.n_assets()) + "; using N");
            k = panel.n_assets();
        }
    }
    const at::PanelTestReport rep = at::run_tests(panel, pipeline_of(f), at::SeedSpec{f.seed, 0});
    emit(f.out, [&](std::ostream& out) {
        write_header(out, "test", f, panel.n_assets(), panel.n_periods());
        out << "# screened=" << rep.screening.indices.size() << "\n# penalty=" << at::format_real(rep.precision.penalty)
            << '\n';
        out << "test,statistic,critical_value,p_value,level,decision,k\n";
        for (const auto& o : rep.outcomes) {
            out << o.test_name << ',' << at::format_real(o.statistic) << ',' << at::format_real(o.critical_value)
                << ',' << at::format_real(o.p_value) << ',' << at::format_real(o.level) << ','
                << (o.decision ? "reject" : "accept") << ',' << o.k_or_K << '\n';
        }
    });
    return kExitOk;
}

int run_rolling(const DataFlags& d, const TestFlags& f, at::Index window, at::Index step) {
    at::RollingConfig cfg;
    cfg.window_length = window;
    cfg.step = step;
    cfg.C = f.C;
    cfg.rho = f.rho;
    cfg.adaptive_bounds = f.big_ks;
    cfg.B = f.B;
    cfg.seed = f.seed;
    cfg.level = f.level;
    cfg.threads = f.threads;
    const at::ReportDocument doc = at::rolling_test(d.manifest(), cfg);
    emit(f.out, [&](std::ostream& out) { at::report::write_report_csv(out, doc); });
    return kExitOk;
}

struct SimulateFlags {
    std::string design;
    std::optional<at::Index> replications;
    std::optional<at::Index> B;
    std::optional<std::uint64_t> seed;
    std::optional<double> level;
    std::optional<double> rho;
    std::optional<double> C;
    std::optional<std::size_t> threads;
    std::string out;
    std::string plot;
};

int run_simulate(const SimulateFlags& s) {
    at::mc::ExperimentConfig cfg = at::mc::read_design(s.design);
    auto& o = cfg.options;
    if (s.replications) o.replications = *s.replications;
    if (s.B) o.B = *s.B;
    if (s.seed) o.seed = *s.seed;
    if (s.level) o.level = *s.level;
    if (s.rho) o.pipeline.rho = *s.rho;
    if (s.C) o.pipeline.screening_c = *s.C;
    if (s.threads) o.threads = *s.threads;
    const at::mc::RejectionReport rep = at::mc::run_experiment(cfg.design, o);
    emit(s.out, [&](std::ostream& out) { at::report::write_rejection_csv(out, rep); });
    if (!s.plot.empty()) {
        at::report::write_file(s.plot, rep, [&](std::ostream& out, const at::mc::RejectionReport& r) {
            at::report::write_power_svg(out, r, cfg.design.name);
        });
    }
    return kExitOk;
}

struct MimicFlags {
    std::string mode = "S1";
    at::Index window = 96;
    std::string window_end;
    at::Index replications = 1000;
    std::vector<std::string> tests{"PY", "MAX", "COM", "AT(5)", "AT(10)", "AT(30)", "FLY"};
};

int run_mimic(const DataFlags& d, const TestFlags& f, const MimicFlags& m) {
    const at::io::RawData raw = at::io::load(d.manifest());
    const auto total = static_cast<at::Index>(raw.dates.size());
    at::Index end = total;
    if (!m.window_end.empty()) {
        const auto it = std::find(raw.dates.begin(), raw.dates.end(), m.window_end);
        if (it == raw.dates.end()) at::fail(at::ErrorCode::InvalidArgument, "no period labelled " + m.window_end);
        end = static_cast<at::Index>(it - raw.dates.begin()) + 1;
    }
    if (end < m.window) at::fail(at::ErrorCode::InsufficientSample, "not enough periods before the window end");
    const at::PanelData window = at::io::window_panel(raw, end - m.window, end);

    at::MimicOptions opt;
    opt.tests = m.tests;
    for (auto& name : opt.tests) {
        const at::Index k = at::mc::parse_bound(name, "AT");
        if (k > window.n_assets()) name = at::adaptive_name(window.n_assets());
    }
    opt.replications = m.replications;
    opt.B = f.B;
    opt.seed = f.seed;
    opt.level = f.level;
    opt.pipeline = pipeline_of(f);
    opt.threads = f.threads;
    const at::MimicMode mode = m.mode == "S2" ? at::MimicMode::S2 : at::MimicMode::S1;
    const at::mc::RejectionReport rep = at::mimic_study(window, mode, opt);
    emit(f.out, [&](std::ostream& out) { at::report::write_rejection_csv(out, rep); });
    return kExitOk;
}

int exit_code_for(const at::Error& e) {
    switch (e.code()) {
        case at::ErrorCode::InvalidArgument:
        case at::ErrorCode::InvalidK:
            return kExitUsage;
        default:
            return kExitData;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive tests of zero alphas in high-dimensional factor pricing models"};
    app.set_version_flag("--version", std::string(at::kVersion));
    app.require_subcommand(1);

    DataFlags data;
    TestFlags flags;

    auto* test = app.add_subcommand("test", "run every test on one panel");
    add_data_flags(test, data);
    add_test_flags(test, flags, true);

    at::Index window = 96;
    at::Index step = 1;
    auto* rolling = app.add_subcommand("rolling", "rolling-window p-values");
    add_data_flags(rolling, data);
    add_test_flags(rolling, flags, false);
    rolling->add_option("--window", window, "window length")->capture_default_str();
    rolling->add_option("--step", step, "periods between window ends")->capture_default_str();

    SimulateFlags sim;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo size and power of a design file");
    simulate->add_option("design", sim.design, "design config (key = value)")->required()->check(CLI::ExistingFile);
    simulate->add_option("--replications", sim.replications, "Monte Carlo replications");
    simulate->add_option("--B", sim.B, "null simulation draws");
    simulate->add_option("--seed", sim.seed, "master seed");
    simulate->add_option("--level", sim.level, "significance level");
    simulate->add_option("--rho", sim.rho, "glasso penalty");
    simulate->add_option("--C", sim.C, "screening constant");
    simulate->add_option("--threads", sim.threads, "worker threads, 0 = all cores");
    simulate->add_option("--out", sim.out, "rejection CSV (default: stdout)");
    simulate->add_option("--emit-plot", sim.plot, "write a power-curve SVG here");

    MimicFlags mim;
    auto* mimic = app.add_subcommand("mimic", "S1/S2 study on data generated from a fitted window");
    add_data_flags(mimic, data);
    add_test_flags(mimic, flags, false);
    mimic->add_option("--mode", mim.mode, "S1 (null) or S2 (screened alphas)")
        ->capture_default_str()
        ->check(CLI::IsMember({"S1", "S2"}));
    mimic->add_option("--window", mim.window, "window length")->capture_default_str();
    mimic->add_option("--window-end", mim.window_end, "date label of the last period (default: last)");
    mimic->add_option("--replications", mim.replications, "replications")->capture_default_str();
    mimic->add_option("--tests", mim.tests, "tests to run")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*test) return run_test(data, flags);
        if (*rolling) return run_rolling(data, flags, window, step);
        if (*simulate) return run_simulate(sim);
        if (*mimic) return run_mimic(data, flags, mim);
    } catch (const at::Error& e) {
        std::cerr << "error [" << at::to_string(e.code()) << "]: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
