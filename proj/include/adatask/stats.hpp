/// @file stats.hpp
/// Summary statistics used by the harness: means, confidence intervals,
/// Spearman correlation and paired t-tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace adatask {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty sample");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
inline double stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Half-width 1.96 * standard error.
inline double ci95(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    return 1.96 * stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

/// Ranks starting at 1; ties get their average rank.
inline std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson needs two equal samples of size >= 2");
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

struct PairedTTest {
    double mean_difference = 0.0;
    double t_statistic = 0.0;
    std::size_t degrees_of_freedom = 0;
    double p_value_greater = 1.0;  // H1: mean(a - b) > 0
};

inline PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("paired test needs two equal samples of size >= 2");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    PairedTTest r;
    r.mean_difference = mean(diff);
    r.degrees_of_freedom = diff.size() - 1;
    const double se = stddev(diff) / std::sqrt(static_cast<double>(diff.size()));
    if (se == 0.0) {
        r.t_statistic = r.mean_difference > 0.0 ? std::numeric_limits<double>::infinity()
                        : r.mean_difference < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0;
        r.p_value_greater = r.mean_difference > 0.0 ? 0.0 : r.mean_difference < 0.0 ? 1.0 : 0.5;
        return r;
    }
    r.t_statistic = r.mean_difference / se;
    boost::math::students_t dist(static_cast<double>(r.degrees_of_freedom));
    r.p_value_greater = boost::math::cdf(boost::math::complement(dist, r.t_statistic));
    return r;
}

}  // namespace adatask
