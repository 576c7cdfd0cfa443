#include <gtest/gtest.h>

#include <numeric>

#include "alphatest/precision.hpp"
#include "helpers.hpp"

using namespace alphatest;
using testing_helpers::random_correlation;
using testing_helpers::random_panel;

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

FactorFit fit_with_alpha(const Vector& alpha, const Vector& sigma_sq) {
    FactorFit f;
    f.alpha_hat = alpha;
    f.sigma_hat_sq = sigma_sq;
    return f;
}

bool non_increasing(const std::vector<double>& trace) {
    for (std::size_t i = 1; i < trace.size(); ++i)
        if (trace[i] > trace[i - 1] + 1e-12 * std::max(1.0, std::abs(trace[i - 1]))) return false;
    return true;
}

double off_l1(const Matrix& m) { return m.cwiseAbs().sum() - m.diagonal().cwiseAbs().sum(); }

}  // namespace

TEST(Screening, ThresholdFormula) {
    EXPECT_NEAR(screening_threshold(100, 96, 1.0), std::log(std::log(96.0)) * std::sqrt(std::log(100.0)), 1e-15);
    EXPECT_EQ(code_of([] { screening_threshold(10, 3, 1.0); }), ErrorCode::InsufficientSample);
    EXPECT_EQ(code_of([] { screening_threshold(10, 50, 0.0); }), ErrorCode::InvalidArgument);
}

TEST(Screening, NullFitIsEmpty) {
    const ScreeningSet s = screen(fit_with_alpha(Vector::Zero(5), Vector::Ones(5)), 60);
    EXPECT_TRUE(s.indices.empty());
}

TEST(Screening, SingleDominantSignal) {
    const double delta = screening_threshold(5, 60, 1.0);
    Vector alpha = Vector::Zero(5);
    alpha(2) = 10.0 * 0.3 * delta;
    const ScreeningSet s = screen(fit_with_alpha(alpha, Vector::Constant(5, 0.09)), 60);
    ASSERT_EQ(s.indices, std::vector<Index>{2});
    EXPECT_TRUE(s.contains(2));
    EXPECT_FALSE(s.contains(1));
}

TEST(Screening, BoundaryIsExcluded) {
    const double delta = screening_threshold(4, 50, 1.0);
    Vector alpha = Vector::Zero(4);
    alpha(1) = 1.0 * delta;  // sigma = 1, so exactly on the boundary
    const ScreeningSet s = screen(fit_with_alpha(alpha, Vector::Ones(4)), 50);
    EXPECT_TRUE(s.indices.empty());
}

TEST(ScreenedCovariance, EmptySetAbsorbsIntercept) {
    const PanelData p = random_panel(4, 30, 2, 31);
    const FactorFit fit = fit_ols(p);
    const ResidualCovariance cov = screened_covariance(p, fit, ScreeningSet{});
    const Matrix u = p.returns - fit.beta_hat * p.factors;
    EXPECT_LT((cov.sigma_u - u * u.transpose() / 30.0).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(cov.alpha_tilde.isZero());
}

TEST(ScreenedCovariance, FullSetUsesResiduals) {
    const PanelData p = random_panel(4, 30, 2, 32);
    const FactorFit fit = fit_ols(p);
    ScreeningSet all;
    all.indices = {0, 1, 2, 3};
    const ResidualCovariance cov = screened_covariance(p, fit, all);
    EXPECT_LT((cov.sigma_u - fit.residuals * fit.residuals.transpose() / 30.0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ScreenedCovariance, HandComputedThreeAssets) {
    // Zero alpha and beta, so the residuals are the returns themselves.
    Matrix x(1, 4), y(3, 4);
    x << 1, 2, 3, 4;
    y << 1, -1, 1, -1,  //
        2, 0, 0, -2,    //
        0, 1, 0, -1;
    const PanelData p{y, x, {}, {}};
    FactorFit fit;
    fit.alpha_hat = Vector::Zero(3);
    fit.beta_hat = Matrix::Zero(3, 1);
    const ResidualCovariance cov = screened_covariance(p, fit, ScreeningSet{});
    Matrix expected(3, 3);
    expected << 1.0, 1.0, 0.0,  //
        1.0, 2.0, 0.5,          //
        0.0, 0.5, 0.5;
    EXPECT_LT((cov.sigma_u - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(cov.r_corr(0, 1), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(cov.r_corr(1, 2), 0.5, 1e-12);
    EXPECT_EQ(cov.r_corr.diagonal(), Vector::Ones(3));
}

TEST(ScreenedCovariance, ZeroVarianceThrows) {
    Matrix x(1, 4), y(2, 4);
    x << 1, 2, 3, 4;
    y << 1, 2, 3, 4,  //
        0, 1, 0, 1;
    FactorFit fit;
    fit.alpha_hat = Vector::Zero(2);
    fit.beta_hat = Matrix::Zero(2, 1);
    fit.beta_hat(0, 0) = 1.0;
    EXPECT_EQ(code_of([&] { screened_covariance(PanelData{y, x, {}, {}}, fit, ScreeningSet{}); }),
              ErrorCode::DegenerateResidual);
}

TEST(Glasso, IdentityIsFixedPoint) {
    for (double rho : {0.0, 0.1, 1.0}) {
        const PrecisionEstimate est = graphical_lasso(Matrix::Identity(6, 6), rho);
        EXPECT_LT((est.k_rho - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Glasso, ZeroPenaltyMatchesDirectInverse) {
    RandomStream rng(33, 0);
    const Matrix r = random_correlation(10, rng);
    GlassoOptions opt;
    opt.tol = 1e-10;
    opt.max_iter = 2000;
    const PrecisionEstimate est = graphical_lasso(r, 0.0, opt);
    EXPECT_LT((est.k_rho - r.inverse()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Glasso, LargePenaltyGivesIdentity) {
    RandomStream rng(34, 0);
    const Matrix r = random_correlation(12, rng, 0.3);
    Matrix off = r;
    off.diagonal().setZero();
    const double rho = off.cwiseAbs().maxCoeff();
    const PrecisionEstimate est = graphical_lasso(r, rho);
    EXPECT_LT((est.k_rho - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(glasso_kkt_residual(est.k_rho, r, rho), 1e-12);
}

TEST(Glasso, ObjectiveNonIncreasingAndKkt) {
    RandomStream rng(35, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const Index n = 5 + 3 * rep;
        const Matrix r = random_correlation(n, rng, 0.2);
        for (double rho : {0.02, 0.1, 0.3}) {
            const PrecisionEstimate est = graphical_lasso(r, rho);
            EXPECT_TRUE(non_increasing(est.objective_trace)) << "n=" << n << " rho=" << rho;
            EXPECT_LE(est.kkt_residual, GlassoOptions{}.tol);
            EXPECT_LE(glasso_kkt_residual(est.k_rho, r, rho), GlassoOptions{}.tol);
            EXPECT_TRUE(linalg::is_positive_definite(est.k_rho));
            EXPECT_LT((est.k_rho - est.k_rho.transpose()).cwiseAbs().maxCoeff(), 1e-14);
        }
    }
}

TEST(Glasso, OffDiagonalMassShrinksWithPenalty) {
    RandomStream rng(36, 0);
    const Matrix r = random_correlation(15, rng, 0.2);
    double prev = std::numeric_limits<double>::infinity();
    for (double rho : {0.01, 0.05, 0.1, 0.2, 0.4}) {
        const double mass = off_l1(graphical_lasso(r, rho).k_rho);
        EXPECT_LE(mass, prev + 1e-6);
        prev = mass;
    }
}

TEST(Glasso, PermutationEquivariant) {
    RandomStream rng(37, 0);
    const Index n = 12;
    const Matrix r = random_correlation(n, rng, 0.2);
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[2], perm[7]);
    Matrix rp(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) rp(i, j) = r(perm[i], perm[j]);
    GlassoOptions opt;
    opt.tol = 1e-10;
    opt.max_iter = 1000;
    const Matrix k = graphical_lasso(r, 0.1, opt).k_rho;
    const Matrix kp = graphical_lasso(rp, 0.1, opt).k_rho;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) EXPECT_NEAR(kp(i, j), k(perm[i], perm[j]), 1e-7);
}

TEST(Glasso, Errors) {
    Matrix bad = Matrix::Identity(3, 3);
    bad(0, 1) = bad(1, 0) = 0.99;
    bad(1, 2) = bad(2, 1) = 0.99;
    bad(0, 2) = bad(2, 0) = -0.99;
    EXPECT_EQ(code_of([&] { graphical_lasso(bad, 0.0); }), ErrorCode::IndefiniteInput);
    EXPECT_EQ(code_of([&] { graphical_lasso(Matrix::Identity(3, 3), -0.1); }), ErrorCode::InvalidArgument);
    Matrix not_unit = Matrix::Identity(3, 3) * 2.0;
    EXPECT_EQ(code_of([&] { graphical_lasso(not_unit, 0.1); }), ErrorCode::InvalidArgument);

    RandomStream rng(38, 0);
    GlassoOptions one_sweep;
    one_sweep.max_iter = 1;
    one_sweep.tol = 1e-14;
    EXPECT_EQ(code_of([&] { graphical_lasso(random_correlation(8, rng, 0.1), 0.01, one_sweep); }),
              ErrorCode::Unconverged);
}

TEST(Precision, UnitScalesAndDiagonalCase) {
    RandomStream rng(39, 0);
    const Matrix k = random_correlation(4, rng).inverse();
    ResidualCovariance cov;
    cov.v_diag = Vector::Ones(4);
    EXPECT_LT((precision(cov, k).gamma_hat - k).cwiseAbs().maxCoeff(), 1e-14);

    cov.v_diag = Vector(4);
    cov.v_diag << 0.5, 1.0, 2.0, 3.0;
    const Matrix g = precision(cov, Matrix::Identity(4, 4)).gamma_hat;
    for (Index i = 0; i < 4; ++i) EXPECT_NEAR(g(i, i), 1.0 / (cov.v_diag(i) * cov.v_diag(i)), 1e-15);
    EXPECT_TRUE((g - Matrix(g.diagonal().asDiagonal())).isZero());
}

TEST(Precision, CongruenceOracle) {
    RandomStream rng(40, 0);
    const Matrix k = random_correlation(4, rng).inverse();
    ResidualCovariance cov;
    cov.v_diag = Vector(4);
    cov.v_diag << 0.7, 1.3, 2.1, 0.4;
    const Matrix g = precision(cov, k).gamma_hat;
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j) EXPECT_NEAR(g(i, j), k(i, j) / (cov.v_diag(i) * cov.v_diag(j)), 1e-12);
}

TEST(Precision, ScaleInvariantCorrelation) {
    const PanelData p = random_panel(8, 40, 2, 41);
    PanelData s = p;
    s.returns *= 3.0;
    auto run = [](const PanelData& panel) {
        const FactorFit fit = fit_ols(panel);
        const ResidualCovariance cov = screened_covariance(panel, fit, screen(fit, panel.n_periods()));
        return precision(cov, graphical_lasso(cov.r_corr, 0.1));
    };
    const PrecisionEstimate a = run(p), b = run(s);
    EXPECT_LT((a.k_rho - b.k_rho).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((a.gamma_hat - 9.0 * b.gamma_hat).cwiseAbs().maxCoeff(), 1e-10 * a.gamma_hat.cwiseAbs().maxCoeff());
}

TEST(Precision, EstimatorInterface) {
    RandomStream rng(42, 0);
    const Matrix r = random_correlation(10, rng, 0.3);
    const GraphicalLassoEstimator est;
    EXPECT_EQ(est.name(), "glasso");
    const PrecisionEstimate e = est.estimate(r, 100);
    EXPECT_NEAR(e.penalty, default_penalty(10, 100), 1e-15);
    EXPECT_NEAR(default_penalty(10, 100), 1.5 * std::sqrt(std::log(10.0) / 100.0), 1e-15);
}
