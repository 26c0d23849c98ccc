/**
 * @file potentials.hpp
 * @brief Class-pair potential matrix and its multiplicative difficulty update.
 *
 * Potentials C(i,j) are kept as log C(i,j). An update on an episode's pairs is
 *
 *     log C(i,j) <- tau * log C(i,j) + alpha * s(u(i,j))
 *
 * where u(i,j) is the pair confusion of the episode and s the strategy
 * transform. Alongside the logs the matrix keeps a linear-domain cache
 * exp(log C - shift) with per-row sums, which is what the samplers read.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adatask/csv.hpp"
#include "adatask/episode.hpp"

namespace adatask {

enum class Strategy { Hard, Easy, Uncertain };

inline std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::Hard: return "hard";
        case Strategy::Easy: return "easy";
        case Strategy::Uncertain: return "uncertain";
    }
    return "?";
}

/// Exponent score of a pair confusion u in [0, 2]. Easy and Uncertain clamp
/// u to [0, 1] first; Hard uses u unchanged.
inline double strategy_score(Strategy strategy, double u) {
    switch (strategy) {
        case Strategy::Hard: return u;
        case Strategy::Easy: return 1.0 - std::clamp(u, 0.0, 1.0);
        case Strategy::Uncertain: {
            const double c = std::clamp(u, 0.0, 1.0);
            return (1.0 - c) * c;
        }
    }
    return 0.0;
}

struct PairConfusion {
    ClassId first = 0;
    ClassId second = 0;
    double value = 0.0;  // in [0, 2]
};

/**
 * Average probability mass the learner puts on the wrong member of each
 * episode pair, summed over both directions:
 *
 *     u(i,j) = mean_{q labeled j} p(i|q) + mean_{q labeled i} p(j|q)
 *
 * One entry per unordered pair of the episode's categories, reported with
 * the classes' ids (not way positions), ordered by way position.
 */
inline std::vector<PairConfusion> pair_confusion(const PredictionBatch& predictions, const Episode& episode) {
    validate_predictions(predictions, episode);
    const auto k = episode.k_way();
    const auto n = episode.n_query;

    // mass[a][b] = sum over queries of way a of p(b|q)
    std::vector<double> mass(k * k, 0.0);
    for (std::size_t q = 0; q < episode.query.size(); ++q) {
        const auto a = episode.query[q].way;
        for (std::size_t b = 0; b < k; ++b)
            mass[a * k + b] += predictions.probs(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(b));
    }
    std::vector<std::size_t> per_way(k, 0);
    for (const auto& q : episode.query) ++per_way[q.way];
    for (auto count : per_way)
        if (count != n) throw std::invalid_argument("query set does not hold exactly N queries per class");

    std::vector<PairConfusion> out;
    out.reserve(k * (k - 1) / 2);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b)
            out.push_back({episode.categories[a], episode.categories[b],
                           (mass[b * k + a] + mass[a * k + b]) * inv_n});
    return out;
}

class PotentialMatrix {
public:
    explicit PotentialMatrix(std::size_t num_classes)
        : n_(num_classes), log_(num_classes * num_classes, 0.0), linear_(num_classes * num_classes, 1.0),
          row_sums_(num_classes, static_cast<double>(num_classes) - 1.0) {
        if (num_classes < 2) throw std::invalid_argument("potential matrix needs at least 2 classes");
        for (std::size_t i = 0; i < n_; ++i) linear_[i * n_ + i] = 0.0;
    }

    std::size_t num_classes() const noexcept { return n_; }

    double log_potential(ClassId i, ClassId j) const {
        check_pair(i, j);
        return log_[i * n_ + j];
    }
    double potential(ClassId i, ClassId j) const { return std::exp(log_potential(i, j)); }

    void set_log_potential(ClassId i, ClassId j, double value) {
        check_pair(i, j);
        if (!std::isfinite(value)) throw std::domain_error("non-finite log potential");
        log_[i * n_ + j] = value;
        log_[j * n_ + i] = value;
        refresh_cache({&i, 1}, {&j, 1});
    }
    void set_potential(ClassId i, ClassId j, double value) {
        if (!(value > 0.0)) throw std::domain_error("potential must be positive");
        set_log_potential(i, j, std::log(value));
    }

    /// Linear-domain weight exp(log C(i,j) - shift()); 0 on the diagonal.
    double scaled(ClassId i, ClassId j) const noexcept { return linear_[i * n_ + j]; }
    std::span<const double> scaled_row(ClassId i) const noexcept { return {linear_.data() + i * n_, n_}; }
    double scaled_row_sum(ClassId i) const noexcept { return row_sums_[i]; }
    double shift() const noexcept { return shift_; }

    /**
     * Applies the discounted multiplicative update to the listed pairs.
     * Pairs not listed keep their value. The matrix is left untouched if any
     * updated entry would be non-finite.
     */
    void apply_update(std::span<const PairConfusion> confusions, double alpha, double tau, Strategy strategy) {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be positive and finite");
        if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
        std::vector<double> next;
        next.reserve(confusions.size());
        for (const auto& pc : confusions) {
            check_pair(pc.first, pc.second);
            const double v = tau * log_[pc.first * n_ + pc.second] + alpha * strategy_score(strategy, pc.value);
            if (!std::isfinite(v)) throw std::domain_error("potential update produced a non-finite value");
            next.push_back(v);
        }
        std::vector<ClassId> touched;
        touched.reserve(2 * confusions.size());
        for (std::size_t p = 0; p < confusions.size(); ++p) {
            const auto i = confusions[p].first, j = confusions[p].second;
            log_[i * n_ + j] = next[p];
            log_[j * n_ + i] = next[p];
            touched.push_back(i);
            touched.push_back(j);
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        refresh_cache(touched, touched);
    }

    double max_log_potential() const {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j) m = std::max(m, log_[i * n_ + j]);
        return m;
    }

private:
    void check_pair(ClassId i, ClassId j) const {
        if (i >= n_ || j >= n_) throw std::out_of_range("class pair outside matrix bounds");
        if (i == j) throw std::out_of_range("diagonal potential is undefined");
    }

    // Recomputes cached exponentials of entries (r, c) for r in rows, c in
    // cols, or of the whole matrix if the shift has drifted out of range.
    void refresh_cache(std::span<const ClassId> rows, std::span<const ClassId> cols) {
        double local_max = -std::numeric_limits<double>::infinity();
        for (auto r : rows)
            for (auto c : cols)
                if (r != c) local_max = std::max(local_max, log_[r * n_ + c]);
        const bool rebuild = local_max > shift_ + kHeadroom || needs_recenter_;
        if (rebuild) {
            shift_ = max_log_potential();
            needs_recenter_ = false;
            for (std::size_t r = 0; r < n_; ++r)
                for (std::size_t c = 0; c < n_; ++c)
                    linear_[r * n_ + c] = r == c ? 0.0 : std::exp(log_[r * n_ + c] - shift_);
            for (std::size_t r = 0; r < n_; ++r) recompute_row_sum(r);
            return;
        }
        for (auto r : rows)
            for (auto c : cols)
                if (r != c) {
                    const double w = std::exp(log_[r * n_ + c] - shift_);
                    linear_[r * n_ + c] = w;
                    linear_[c * n_ + r] = w;
                }
        std::vector<bool> dirty(n_, false);
        for (auto r : rows) dirty[r] = true;
        for (auto c : cols) dirty[c] = true;
        for (std::size_t r = 0; r < n_; ++r) {
            if (!dirty[r]) continue;
            recompute_row_sum(r);
            // all of this row's weights fell far below the shift: re-center next time
            if (row_sums_[r] < kUnderflowGuard) needs_recenter_ = true;
        }
        if (needs_recenter_) refresh_cache({}, {});
    }

    void recompute_row_sum(std::size_t r) {
        double s = 0.0;
        for (std::size_t c = 0; c < n_; ++c) s += linear_[r * n_ + c];
        row_sums_[r] = s;
    }

    static constexpr double kHeadroom = 64.0;
    static constexpr double kUnderflowGuard = 1e-200;

    std::size_t n_;
    std::vector<double> log_;
    std::vector<double> linear_;
    std::vector<double> row_sums_;
    double shift_ = 0.0;
    bool needs_recenter_ = false;
};

/// Functional form of PotentialMatrix::apply_update.
inline PotentialMatrix apply_update(PotentialMatrix matrix, std::span<const PairConfusion> confusions, double alpha,
                                    double tau, Strategy strategy) {
    matrix.apply_update(confusions, alpha, tau, strategy);
    return matrix;
}

/// Dense symmetric table of linear potentials scaled so the largest
/// off-diagonal entry is 1. Diagonal is 0.
inline std::vector<std::vector<double>> snapshot(const PotentialMatrix& matrix) {
    const auto n = matrix.num_classes();
    const double top = matrix.max_log_potential();
    std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) out[i][j] = std::exp(matrix.log_potential(i, j) - top);
    return out;
}

/// Heatmap CSV: header of class ids, then one row per class, 6 decimals.
inline void write_snapshot_csv(std::ostream& out, const PotentialMatrix& matrix,
                               std::optional<std::span<const ClassId>> class_ids = std::nullopt) {
    const auto table = snapshot(matrix);
    const auto n = matrix.num_classes();
    if (class_ids && class_ids->size() != n) throw std::invalid_argument("class id list has wrong length");
    for (std::size_t i = 0; i < n; ++i) out << (i ? "," : "") << (class_ids ? (*class_ids)[i] : i);
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) out << (j ? "," : "") << format_fixed(table[i][j], 6);
        out << '\n';
    }
}

}  // namespace adatask
