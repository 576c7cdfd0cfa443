#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "alphatest/error.hpp"

namespace alphatest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace linalg {

inline constexpr double kMaxConditionNumber = 1e12;
inline constexpr double kEigenFloor = 1e-8;

/// Condition number of a small symmetric matrix via its spectrum.
inline double condition_number(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

/// Cholesky factor of a small Gram matrix, refusing ill-conditioned input.
inline Eigen::LLT<Matrix> guarded_cholesky(const Matrix& gram, const std::string& what) {
    const double cond = condition_number(gram);
    if (!(cond < kMaxConditionNumber)) {
        std::ostringstream os;
        os << what << " is singular or ill-conditioned (condition number " << cond
           << " >= " << kMaxConditionNumber << ")";
        fail(ErrorCode::SingularDesign, os.str());
    }
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
        fail(ErrorCode::SingularDesign, what + " failed Cholesky factorisation");
    }
    return llt;
}

inline bool is_positive_definite(const Matrix& sym) {
    Eigen::LLT<Matrix> llt(sym);
    return llt.info() == Eigen::Success;
}

/// Symmetrise and floor the spectrum at `floor`. Returns true when anything
/// had to change.
inline bool floor_eigenvalues(Matrix& sym, double floor = kEigenFloor) {
    Matrix s = 0.5 * (sym + sym.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    Vector ev = es.eigenvalues();
    if (ev.minCoeff() >= floor) {
        sym = s;
        return false;
    }
    ev = ev.cwiseMax(floor);
    sym = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    sym = 0.5 * (sym + sym.transpose());
    return true;
}

/// Symmetric PSD square root through the eigendecomposition.
inline Matrix symmetric_sqrt(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()));
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Matrix out = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace linalg
}  // namespace alphatest
