#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "alphatest/design_config.hpp"
#include "alphatest/mc_lab.hpp"
#include "helpers.hpp"

using namespace alphatest;
using namespace alphatest::mc;

namespace {

template <class Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no exception";
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Factors, FrozenInnovationsReachFixedPoint) {
    const Matrix x = simulate_factors(FactorGarchSpec{}, 5, [] { return 0.0; });
    EXPECT_NEAR(x(0, 0), 0.53 / 0.94, 1e-6);
    EXPECT_NEAR(x(1, 0), 0.19 / 0.81, 1e-6);
    EXPECT_NEAR(x(2, 0), 0.19 / 0.95, 1e-6);
}

TEST(Factors, FirstOutputIsStepOneAfterBurnIn) {
    FactorGarchSpec spec;
    spec.factors = {{0.3, 0.5, 0.2, 0.6, 0.1}};
    spec.burn_in = 0;
    spec.x_init = 1.0;
    spec.h_init = 2.0;
    std::vector<double> seq{0.7, -1.2, 0.4};
    std::size_t pos = 0;
    const Matrix x = simulate_factors(spec, 2, [&] { return seq[pos++]; });
    const double h1 = 0.2 + 0.6 * 2.0 + 0.1 * 2.0 * 0.7 * 0.7;
    const double x1 = 0.3 + 0.5 * 1.0 + std::sqrt(h1) * -1.2;
    const double h2 = 0.2 + 0.6 * h1 + 0.1 * h1 * 1.44;
    const double x2 = 0.3 + 0.5 * x1 + std::sqrt(h2) * 0.4;
    EXPECT_DOUBLE_EQ(x(0, 0), x1);
    EXPECT_DOUBLE_EQ(x(0, 1), x2);
    EXPECT_EQ(pos, 3u);
}

TEST(Factors, BurnInShiftsTheWindow) {
    FactorGarchSpec spec;
    spec.factors.resize(1);
    RandomStream a(1, 0), b(1, 0);
    spec.burn_in = 0;
    const Matrix full = simulate_factors(spec, 60, a);
    spec.burn_in = 10;
    const Matrix tail = simulate_factors(spec, 50, b);
    EXPECT_EQ(tail, full.rightCols(50));
}

TEST(Covariance, ZeroLoadingGivesLambda) {
    CovarianceSpec spec;
    spec.loading_override = Vector::Zero(7);
    RandomStream rng(2, 0);
    const Matrix s = build_covariance(spec, 7, rng);
    EXPECT_TRUE((s - Matrix(s.diagonal().asDiagonal())).isZero(0.0));
    EXPECT_GE(s.diagonal().minCoeff(), 1.0);
    EXPECT_LE(s.diagonal().maxCoeff(), 2.0);
}

TEST(Covariance, Case1LoadingStructure) {
    CovarianceSpec spec;
    RandomStream rng(3, 0);
    const Matrix s = build_covariance(spec, 100, rng);
    // floor(100^{1/4}) = 3 loaded assets at each end; the rest are uncorrelated
    Index nonzero = 0;
    for (Index i = 0; i < 100; ++i)
        for (Index j = i + 1; j < 100; ++j) nonzero += s(i, j) != 0.0;
    EXPECT_EQ(nonzero, 15);
    EXPECT_NE(s(0, 99), 0.0);
    EXPECT_EQ(s(3, 96), 0.0);
    EXPECT_EQ(floor_power(100, 0.25), 3);
    EXPECT_EQ(floor_power(100, 0.6), 15);
    EXPECT_EQ(floor_power(1000, 1.0 / 3.0), 10);
}

TEST(Covariance, Ar1InverseIsClosedFormTridiagonal) {
    CovarianceSpec spec;
    spec.kind = CovarianceCase::ar1;
    RandomStream rng(4, 0);
    const Matrix s = build_covariance(spec, 5, rng);
    const double rho = 0.6;
    Matrix precision = Matrix::Zero(5, 5);
    for (Index i = 0; i < 5; ++i) {
        precision(i, i) = (i == 0 || i == 4) ? 1.0 : 1.0 + rho * rho;
        if (i + 1 < 5) precision(i, i + 1) = precision(i + 1, i) = -rho;
    }
    precision /= 1.0 - rho * rho;
    EXPECT_LT((s * precision - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_DOUBLE_EQ(s(0, 3), std::pow(0.6, 3));
}

TEST(Covariance, Case2DenseOracle) {
    const Index n = 6;
    CovarianceSpec spec;
    spec.kind = CovarianceCase::case2;
    Vector l(n);
    l << 0.8, 0.75, 0.0, 0.0, 0.0, 0.0;
    spec.loading_override = l;
    RandomStream rng(5, 0);
    const Matrix s = build_covariance(spec, n, rng);

    // 1-based definition: w_{i+1,i} = 0.5 (i = 1..N-2), w_{j-1,j} = 0.5 (j = 3..N), w_{12} = w_{N,N-1} = 1
    Matrix w = Matrix::Zero(n, n);
    auto at = [&](Index i, Index j) -> double& { return w(i - 1, j - 1); };
    for (Index i = 1; i <= n - 2; ++i) at(i + 1, i) = 0.5;
    for (Index j = 3; j <= n; ++j) at(j - 1, j) = 0.5;
    at(1, 2) = 1.0;
    at(n, n - 1) = 1.0;
    const Matrix a = Matrix::Identity(n, n) - 0.5 * w;
    const Matrix a_inv = a.fullPivLu().inverse();
    const Matrix expected = l * l.transpose() + a_inv * a_inv.transpose();
    EXPECT_LT((s - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(code_of([&] { build_covariance(spec, 3, rng); }), ErrorCode::InvalidArgument);
}

TEST(Panel, ResidualMeanObeysClt) {
    CovarianceSpec spec;
    spec.kind = CovarianceCase::ar1;
    RandomStream rng(6, 0);
    const Index n = 5, t = 10000;
    const Matrix sigma = build_covariance(spec, n, rng);
    const Matrix beta = draw_betas(BetaLaw{}, n, rng);
    const PanelData p = generate_panel_from_root(linalg::symmetric_sqrt(sigma), ErrorSpec{}, FactorGarchSpec{},
                                                 Vector::Zero(n), beta, t, rng);
    const Vector mean = (p.returns - beta * p.factors).rowwise().mean();
    for (Index i = 0; i < n; ++i) EXPECT_LT(std::abs(mean(i)), 5.0 * std::sqrt(sigma(i, i) / t));
}

TEST(Panel, StudentT3ShocksHaveUnitVariance) {
    ErrorSpec e;
    e.family = ErrorFamily::student_t3;
    RandomStream rng(7, 0);
    const Matrix eps = draw_shocks(e, 1, 100000, rng);
    EXPECT_NEAR(eps.row(0).squaredNorm() / 100000.0, 1.0, 0.05);
}

TEST(Panel, ArchShocksHaveImpliedVariance) {
    ErrorSpec e;
    e.family = ErrorFamily::arch;
    e.gamma0_lo = e.gamma0_hi = 0.4;
    e.gamma1_lo = e.gamma1_hi = 0.3;
    RandomStream rng(8, 0);
    const Matrix eps = draw_shocks(e, 1, 200000, rng);
    // stationary variance gamma0 / (1 - gamma1)
    EXPECT_NEAR(eps.row(0).squaredNorm() / 200000.0, 0.4 / 0.7, 0.02);
}

TEST(Panel, FixedSeedIsDeterministic) {
    auto make = [] {
        RandomStream rng(9, 0);
        const Matrix sigma = build_covariance(CovarianceSpec{}, 20, rng);
        return generate_panel(sigma, ErrorSpec{}, FactorGarchSpec{}, Vector::Zero(20), BetaLaw{}, 20, 30, rng);
    };
    const PanelData a = make(), b = make();
    EXPECT_EQ(a.returns, b.returns);
    EXPECT_EQ(a.factors, b.factors);
}

TEST(Alpha, ScenarioSparsityAndMagnitude) {
    RandomStream rng(10, 0);
    EXPECT_EQ(scenario_sparsity({ScenarioKind::s1, 1}, 100), 3);
    EXPECT_EQ(scenario_sparsity({ScenarioKind::s2, 1}, 100), 4);
    EXPECT_EQ(scenario_sparsity({ScenarioKind::fig1, 7}, 100), 7);
    const Vector s2 = generate_alpha({ScenarioKind::s2, 1}, 1.0, 100, 100, rng);
    const double mag = std::sqrt(2.0 * std::log(100.0) / 100.0);
    EXPECT_EQ((s2.array() != 0.0).count(), 4);
    for (Index i = 0; i < 100; ++i)
        if (s2(i) != 0.0) EXPECT_DOUBLE_EQ(std::abs(s2(i)), mag);
    const Vector f = generate_alpha({ScenarioKind::fig1, 3}, 2.0, 100, 50, rng);
    for (Index i = 0; i < 100; ++i)
        if (f(i) != 0.0) EXPECT_DOUBLE_EQ(std::abs(f(i)), std::sqrt(2.0 * std::log(100.0) / 50.0));
    const Vector s1 = generate_alpha({ScenarioKind::s1, 1}, 1.0, 100, 100, rng);
    EXPECT_LE(s1.cwiseAbs().maxCoeff(), mag);
    EXPECT_GE(s1.minCoeff(), 0.0);
}

TEST(Alpha, SameStreamNestsAcrossSignals) {
    RandomStream a(11, 1), b(11, 1);
    const Vector lo = generate_alpha({ScenarioKind::fig1, 2}, 0.5, 50, 100, a);
    const Vector hi = generate_alpha({ScenarioKind::fig1, 2}, 2.0, 50, 100, b);
    EXPECT_LT((hi - 2.0 * lo).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Experiment, CoinMatchesLevel) {
    Design d;
    d.n_assets = 4;
    d.n_periods = 20;
    ExperimentOptions o;
    o.tests = {"COIN"};
    o.replications = 4000;
    o.seed = 12;
    const RejectionReport rep = run_experiment(d, o);
    const double band = 2.576 * std::sqrt(0.05 * 0.95 / 4000.0);
    EXPECT_NEAR(rep.find("COIN").rate, 0.05, band);
    EXPECT_EQ(rep.find("COIN").replications, 4000);
}

TEST(Experiment, DeterministicAcrossThreadCounts) {
    Design d;
    d.covariance.kind = CovarianceCase::ar1;
    d.n_assets = 12;
    d.n_periods = 40;
    ExperimentOptions o;
    o.tests = {"AT(2)", "PY", "MAX"};
    o.replications = 24;
    o.B = 100;
    o.seed = 13;
    o.threads = 1;
    const RejectionReport a = run_experiment(d, o);
    o.threads = 4;
    const RejectionReport b = run_experiment(d, o);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].rate, b.rows[i].rate);
}

TEST(Experiment, PowerIsMonotoneInSignal) {
    Design d;
    d.covariance.kind = CovarianceCase::ar1;
    d.scenario = {ScenarioKind::fig1, 1};
    d.signals = {0.5, 1.0, 1.5, 2.0, 2.5};
    d.n_assets = 20;
    d.n_periods = 60;
    ExperimentOptions o;
    o.tests = {"AT(2)", "MAX"};
    o.replications = 120;
    o.B = 100;
    o.seed = 14;
    const RejectionReport rep = run_experiment(d, o);
    for (const std::string test : {"AT(2)", "MAX"}) {
        for (std::size_t i = 1; i < d.signals.size(); ++i) {
            // common random numbers across signals keep the curve tight; allow 1.5 MC standard errors
            const double prev = rep.find(test, d.signals[i - 1]).rate;
            const double cur = rep.find(test, d.signals[i]).rate;
            EXPECT_GE(cur, prev - 1.5 * std::sqrt(0.25 / 120.0)) << test << " at a = " << d.signals[i];
        }
        EXPECT_GT(rep.find(test, 2.5).rate, rep.find(test, 0.5).rate);
    }
}

TEST(Experiment, UnknownTestName) {
    ExperimentOptions o;
    o.tests = {"WALD"};
    EXPECT_EQ(code_of([&] { run_experiment(Design{}, o); }), ErrorCode::InvalidArgument);
}

TEST(TestNames, ParseBounds) {
    EXPECT_EQ(parse_bound("AT(10)", "AT"), 10);
    EXPECT_EQ(parse_bound("G(3)", "G"), 3);
    EXPECT_EQ(parse_bound("AT()", "AT"), 0);
    EXPECT_EQ(parse_bound("PY", "AT"), 0);
    const PipelineConfig cfg = pipeline_for_tests({"AT(5)", "G(1)", "FLY", "COIN"}, PipelineConfig{});
    EXPECT_EQ(cfg.adaptive_bounds, (std::vector<Index>{5}));
    EXPECT_EQ(cfg.fixed_ks, (std::vector<Index>{1}));
    EXPECT_TRUE(cfg.benchmarks);
}

TEST(DesignConfig, ParsesAllKeys) {
    std::istringstream in(R"(# comment
name = demo
covariance = case2
delta_gamma = 3/5
case2_rho = 0.4
errors = arch
innovation = t3
scenario = fig1
k = 2
signals = 0.5, 1.5  # trailing comment
N = 50
T = 80
draws = once
tests = AT(5), G(1), PY
replications = 10
B = 150
seed = 99
level = 0.1
threads = 2
)");
    const ExperimentConfig c = parse_design(in);
    EXPECT_EQ(c.design.name, "demo");
    EXPECT_EQ(c.design.covariance.kind, CovarianceCase::case2);
    EXPECT_DOUBLE_EQ(c.design.covariance.delta_gamma, 0.6);
    EXPECT_DOUBLE_EQ(c.design.covariance.case2_rho, 0.4);
    EXPECT_EQ(c.design.errors.family, ErrorFamily::arch);
    EXPECT_EQ(c.design.errors.innovation, Innovation::t3);
    EXPECT_EQ(c.design.scenario.kind, ScenarioKind::fig1);
    EXPECT_EQ(c.design.scenario.k, 2);
    EXPECT_EQ(c.design.signals, (std::vector<double>{0.5, 1.5}));
    EXPECT_EQ(c.design.n_assets, 50);
    EXPECT_EQ(c.design.n_periods, 80);
    EXPECT_FALSE(c.design.redraw_per_replicate);
    EXPECT_EQ(c.options.tests, (std::vector<std::string>{"AT(5)", "G(1)", "PY"}));
    EXPECT_EQ(c.options.replications, 10);
    EXPECT_EQ(c.options.B, 150);
    EXPECT_EQ(c.options.seed, 99u);
    EXPECT_DOUBLE_EQ(c.options.level, 0.1);
    EXPECT_EQ(c.options.threads, 2u);
}

TEST(DesignConfig, Errors) {
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return parse_design(in);
    };
    EXPECT_EQ(code_of([&] { parse("colour = blue\n"); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([&] { parse("N = ten\n"); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([&] { parse("covariance = case9\n"); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([&] { parse("just text\n"); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([&] { parse("tests = AT(5), BOGUS\n"); }), ErrorCode::InvalidArgument);
}
