#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "alphatest/error.hpp"
#include "alphatest/linalg.hpp"
#include "alphatest/parallel.hpp"

namespace alphatest {

/// z = Gamma alpha and the diagonal-normalised contributions z_j^2 / gamma_jj,
/// with `order` listing assets by decreasing contribution.
struct ZScores {
    Vector z;
    Vector gamma_diag;
    Vector contributions;
    std::vector<Index> order;
};

enum class StatisticKind { exact, modified };

struct StatisticValue {
    Index k = 0;
    double value = 0.0;
    StatisticKind kind = StatisticKind::modified;
    std::vector<Index> chosen_set;  // exact kind only, ascending
};

struct AdaptiveValue {
    Index K = 0;
    Index k0 = 0;  // 1-based
    double value = 0.0;
    Vector standardized;
    Vector null_mean;
    Vector null_sd;
};

/// Indices sorted by decreasing value; ties keep the smaller index first.
inline std::vector<Index> descending_order(const Vector& values) {
    std::vector<Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return values(a) > values(b); });
    return order;
}

inline void check_gamma_diagonal(const Vector& gamma_diag) {
    for (Index j = 0; j < gamma_diag.size(); ++j) {
        if (!(gamma_diag(j) > 0.0)) {
            fail(ErrorCode::InvalidPrecision,
                 "precision diagonal entry " + std::to_string(j) + " is not positive");
        }
    }
}

inline ZScores z_scores(const Vector& alpha_hat, const Matrix& gamma_hat) {
    if (gamma_hat.rows() != alpha_hat.size() || gamma_hat.cols() != alpha_hat.size()) {
        fail(ErrorCode::InvalidArgument, "precision matrix and alpha vector sizes differ");
    }
    ZScores zs;
    zs.gamma_diag = gamma_hat.diagonal();
    check_gamma_diagonal(zs.gamma_diag);
    zs.z = gamma_hat * alpha_hat;
    zs.contributions = zs.z.array().square() / zs.gamma_diag.array();
    zs.order = descending_order(zs.contributions);
    return zs;
}

/// T times the running sums of the sorted contributions: entry k-1 is G~_T(k).
/// Only the top `k_max` entries are needed, so a partial sort suffices.
inline Vector modified_statistics(const Vector& contributions, Index k_max, double n_periods) {
    const Index n = contributions.size();
    if (k_max < 1 || k_max > n) {
        fail(ErrorCode::InvalidK, "k must lie in [1, " + std::to_string(n) + "], got " + std::to_string(k_max));
    }
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    auto cmp = [&](Index a, Index b) {
        return contributions(a) > contributions(b) || (contributions(a) == contributions(b) && a < b);
    };
    std::partial_sort(idx.begin(), idx.begin() + k_max, idx.end(), cmp);
    Vector out(k_max);
    double running = 0.0;
    for (Index k = 0; k < k_max; ++k) {
        running += contributions(idx[static_cast<std::size_t>(k)]);
        out(k) = n_periods * running;
    }
    return out;
}

inline StatisticValue modified_statistic(const ZScores& zs, Index k, Index n_periods) {
    const Index n = zs.contributions.size();
    if (k < 1 || k > n) {
        fail(ErrorCode::InvalidK, "k must lie in [1, " + std::to_string(n) + "], got " + std::to_string(k));
    }
    double sum = 0.0;
    for (Index i = 0; i < k; ++i) sum += zs.contributions(zs.order[static_cast<std::size_t>(i)]);
    StatisticValue out;
    out.k = k;
    out.kind = StatisticKind::modified;
    out.value = static_cast<double>(n_periods) * sum;
    return out;
}

inline double binomial_coefficient(Index n, Index k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (Index i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(c);
}

inline constexpr double kExactEnumerationBudget = 1e7;

namespace detail {

/// Advances `comb` to the next k-combination of [0, n) in lexicographic order.
inline bool next_combination(std::vector<Index>& comb, Index n) {
    const auto k = static_cast<Index>(comb.size());
    for (Index i = k - 1; i >= 0; --i) {
        auto& c = comb[static_cast<std::size_t>(i)];
        if (c < n - k + i) {
            ++c;
            for (Index j = i + 1; j < k; ++j) comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace detail

/// G_T(k) = T max_{|S|=k} {Gamma a}_S' Gamma_SS^{-1} {Gamma a}_S by full
/// enumeration. Meant as a reference for small problems only.
/// Subsets are grouped by their smallest element and scanned in parallel;
/// groups are reduced in order, so the argmax is the lexicographically first
/// maximiser regardless of thread count.
inline StatisticValue exact_statistic(const Vector& alpha_hat, const Matrix& gamma_hat, Index k,
                                      Index n_periods, std::size_t threads = 1) {
    const Index n = alpha_hat.size();
    if (gamma_hat.rows() != n || gamma_hat.cols() != n) {
        fail(ErrorCode::InvalidArgument, "precision matrix and alpha vector sizes differ");
    }
    if (k < 1 || k > n) {
        fail(ErrorCode::InvalidK, "k must lie in [1, " + std::to_string(n) + "], got " + std::to_string(k));
    }
    check_gamma_diagonal(gamma_hat.diagonal());
    if (binomial_coefficient(n, k) > kExactEnumerationBudget) {
        fail(ErrorCode::BudgetExceeded, "C(" + std::to_string(n) + ", " + std::to_string(k) +
                                            ") subsets exceed the enumeration budget; use modified_statistic");
    }
    const Vector z = gamma_hat * alpha_hat;

    struct Best {
        double value = -1.0;
        std::vector<Index> set;
    };
    const Index groups = n - k + 1;
    std::vector<Best> best(static_cast<std::size_t>(groups));

    parallel_for(static_cast<std::size_t>(groups), threads, [&](std::size_t g) {
        const auto first = static_cast<Index>(g);
        std::vector<Index> subset(static_cast<std::size_t>(k));
        std::iota(subset.begin(), subset.end(), first);
        Matrix sub(k, k);
        Vector zs(k);
        Best local;
        do {
            for (Index a = 0; a < k; ++a) {
                const Index ia = subset[static_cast<std::size_t>(a)];
                zs(a) = z(ia);
                for (Index b = 0; b < k; ++b) sub(a, b) = gamma_hat(ia, subset[static_cast<std::size_t>(b)]);
            }
            Eigen::LLT<Matrix> llt(sub);
            if (llt.info() != Eigen::Success) {
                fail(ErrorCode::InvalidPrecision, "a principal submatrix of the precision is not positive definite");
            }
            const double value = zs.dot(llt.solve(zs));
            if (value > local.value) {
                local.value = value;
                local.set = subset;
            }
        } while (detail::next_combination(subset, n) && subset[0] == first);
        best[g] = std::move(local);
    });

    StatisticValue out;
    out.k = k;
    out.kind = StatisticKind::exact;
    double top = -1.0;
    for (auto& b : best) {
        if (b.value > top) {
            top = b.value;
            out.chosen_set = b.set;
        }
    }
    out.value = static_cast<double>(n_periods) * std::max(top, 0.0);
    return out;
}

/// max_k (G~(k) - mean_k) / sd_k over k = 1..K; k0 is the smallest maximiser.
inline AdaptiveValue adaptive_statistic(const Vector& per_k, const Vector& null_mean, const Vector& null_sd) {
    const Index big_k = per_k.size();
    if (big_k < 1) fail(ErrorCode::InvalidK, "adaptive statistic needs K >= 1");
    if (null_mean.size() < big_k || null_sd.size() < big_k) {
        fail(ErrorCode::InvalidArgument, "null moments shorter than K");
    }
    AdaptiveValue out;
    out.K = big_k;
    out.null_mean = null_mean.head(big_k);
    out.null_sd = null_sd.head(big_k);
    out.standardized.resize(big_k);
    for (Index k = 0; k < big_k; ++k) {
        if (!(out.null_sd(k) > 0.0)) {
            fail(ErrorCode::DegenerateNull, "null standard deviation is zero at k = " + std::to_string(k + 1));
        }
        out.standardized(k) = (per_k(k) - out.null_mean(k)) / out.null_sd(k);
    }
    out.k0 = 1;
    out.value = out.standardized(0);
    for (Index k = 1; k < big_k; ++k) {
        if (out.standardized(k) > out.value) {
            out.value = out.standardized(k);
            out.k0 = k + 1;
        }
    }
    return out;
}

}  // namespace alphatest
