#pragma once

#include "alphatest/linalg.hpp"
#include "alphatest/model.hpp"
#include "alphatest/random.hpp"

namespace testing_helpers {

using alphatest::Index;
using alphatest::Matrix;
using alphatest::Vector;

inline Matrix random_matrix(Index rows, Index cols, alphatest::RandomStream& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
    return m;
}

/// Y = alpha 1' + beta X + noise with non-centred factors.
inline alphatest::PanelData random_panel(Index n, Index t, Index r, std::uint64_t seed, double noise = 1.0) {
    alphatest::RandomStream rng(seed, 0);
    Matrix x = random_matrix(r, t, rng);
    x.array() += 0.5;
    const Matrix beta = random_matrix(n, r, rng);
    const Matrix alpha = random_matrix(n, 1, rng, 0.1);
    Matrix y = beta * x + random_matrix(n, t, rng, noise);
    y.colwise() += alpha.col(0);
    return alphatest::PanelData{y, x, {}, {}};
}

/// Random correlation matrix with condition number kept moderate.
inline Matrix random_correlation(Index n, alphatest::RandomStream& rng, double ridge = 1.0) {
    const Matrix a = random_matrix(n, n, rng);
    Matrix s = a * a.transpose() / static_cast<double>(n) + ridge * Matrix::Identity(n, n);
    const Vector d = s.diagonal().cwiseSqrt().cwiseInverse();
    return d.asDiagonal() * s * d.asDiagonal();
}

inline Matrix random_spd(Index n, alphatest::RandomStream& rng, double ridge = 0.5) {
    const Matrix a = random_matrix(n, n, rng);
    return a * a.transpose() / static_cast<double>(n) + ridge * Matrix::Identity(n, n);
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace testing_helpers
