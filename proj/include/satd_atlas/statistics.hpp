#pragma once

#include "satd_atlas/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

namespace satd::stats {

struct Correlation {
    double coefficient = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

enum class PValueMethod { TApprox, ExactPermutation };

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw Error(ErrorCode::InsufficientData, "mean of empty series");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Linear-interpolation quantile (the common "type 7" definition).
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw Error(ErrorCode::InsufficientData, "quantile of empty series");
    std::sort(xs.begin(), xs.end());
    const double h = (static_cast<double>(xs.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = static_cast<std::size_t>(std::ceil(h));
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

/// Median of a multiset given as (value, multiplicity) pairs.
inline double weighted_median(std::vector<std::pair<double, std::uint64_t>> items) {
    std::erase_if(items, [](const auto& p) { return p.second == 0; });
    if (items.empty()) throw Error(ErrorCode::InsufficientData, "median of empty multiset");
    std::sort(items.begin(), items.end());
    std::uint64_t total = 0;
    for (const auto& [v, w] : items) total += w;
    // 0-based ranks of the middle element(s)
    const std::uint64_t r1 = (total - 1) / 2, r2 = total / 2;
    std::optional<double> a, b;
    std::uint64_t seen = 0;
    for (const auto& [v, w] : items) {
        if (!a && r1 < seen + w) a = v;
        if (!b && r2 < seen + w) b = v;
        if (a && b) break;
        seen += w;
    }
    return (*a + *b) / 2.0;
}

/// 1-based ranks, ties receive the average of the positions they span.
inline std::vector<double> average_ranks(const std::vector<double>& xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

/// Two-sided p-value of a correlation coefficient using t = r·√((n−2)/(1−r²)).
inline double t_approx_p(double r, std::size_t n) {
    if (n < 3) return 1.0;
    const double df = static_cast<double>(n - 2);
    if (std::abs(r) >= 1.0) return 0.0;
    const double t = r * std::sqrt(df / (1.0 - r * r));
    boost::math::students_t dist(df);
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

namespace detail {

inline void check_pair(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw Error(ErrorCode::LengthMismatch,
                    "series lengths differ: " + std::to_string(xs.size()) + " vs " + std::to_string(ys.size()));
    if (xs.size() < 3) throw Error(ErrorCode::InsufficientData, "need at least 3 pairs");
    for (double v : xs)
        if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateInput, "non-finite value");
    for (double v : ys)
        if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateInput, "non-finite value");
}

inline bool constant(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

inline double pearson_raw(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (constant(xs) || constant(ys)) throw Error(ErrorCode::DegenerateInput, "constant series");
    const double mx = mean(xs), my = mean(ys);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateInput, "constant series");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double permutation_p(const std::vector<double>& xs, std::vector<double> ys, double observed) {
    if (xs.size() > 10) throw Error(ErrorCode::Config, "exact permutation p-values are limited to n <= 10");
    std::sort(ys.begin(), ys.end());
    std::uint64_t extreme = 0, total = 0;
    do {
        ++total;
        double r = 0.0;
        try {
            r = pearson_raw(xs, ys);
        } catch (const Error&) {
        }
        if (std::abs(r) >= std::abs(observed) - 1e-12) ++extreme;
    } while (std::next_permutation(ys.begin(), ys.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
}

} // namespace detail

inline Correlation pearson(const std::vector<double>& xs, const std::vector<double>& ys,
                           PValueMethod method = PValueMethod::TApprox) {
    detail::check_pair(xs, ys);
    Correlation c;
    c.n = xs.size();
    c.coefficient = detail::pearson_raw(xs, ys);
    c.p_value = method == PValueMethod::TApprox ? t_approx_p(c.coefficient, c.n)
                                                : detail::permutation_p(xs, ys, c.coefficient);
    return c;
}

inline Correlation spearman(const std::vector<double>& xs, const std::vector<double>& ys,
                            PValueMethod method = PValueMethod::TApprox) {
    detail::check_pair(xs, ys);
    // Ranks are permuted for the exact mode; ties keep their average ranks.
    const auto rx = average_ranks(xs), ry = average_ranks(ys);
    Correlation c;
    c.n = xs.size();
    c.coefficient = detail::pearson_raw(rx, ry);
    c.p_value = method == PValueMethod::TApprox ? t_approx_p(c.coefficient, c.n)
                                                : detail::permutation_p(rx, ry, c.coefficient);
    return c;
}

struct Summary {
    std::size_t n = 0;
    double mean = 0, median = 0, q1 = 0, q3 = 0, min = 0, max = 0;
};

inline Summary summarize(const std::vector<double>& xs) {
    Summary s;
    s.n = xs.size();
    if (xs.empty()) return s;
    s.mean = mean(xs);
    s.median = quantile(xs, 0.5);
    s.q1 = quantile(xs, 0.25);
    s.q3 = quantile(xs, 0.75);
    auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    s.min = *lo;
    s.max = *hi;
    return s;
}

} // namespace satd::stats
