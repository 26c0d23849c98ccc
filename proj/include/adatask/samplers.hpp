/**
 * @file samplers.hpp
 * @brief Task, class and instance selection distributions.
 *
 * Covers uniform class sampling, the instance- and class-based multiplicative
 * weight updates, exact class-pair (MRF) set distributions, the greedy
 * sequential class-pair sampler, and the exact law of that sampler used to
 * check it against the exact class-pair distribution.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "adatask/csv.hpp"
#include "adatask/episode.hpp"
#include "adatask/potentials.hpp"
#include "adatask/rng.hpp"

namespace adatask {

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// Thrown when an exact computation would enumerate more states than allowed.
class EnumerationCapExceeded : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Saturating binomial coefficient.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
        if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(r);
}

inline double log_sum_exp(std::span<const double> xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

/// Inverse-CDF draw from nonnegative weights with known positive total.
inline std::size_t draw_categorical(std::span<const double> weights, double total, Rng& rng) {
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last_positive = i;
        if (target < acc) return i;
    }
    if (last_positive == weights.size()) throw std::invalid_argument("categorical draw over all-zero weights");
    return last_positive;  // rounding at the top of the CDF
}

inline std::size_t draw_categorical(std::span<const double> weights, Rng& rng) {
    return draw_categorical(weights, std::accumulate(weights.begin(), weights.end(), 0.0), rng);
}

// ---------------------------------------------------------------------------
// Set distributions

/// Probability table over K-subsets of {0, ..., num_classes-1}. Keys are
/// ascending class lists. `sample_count` is nonzero for empirical tables.
struct SetDistribution {
    std::size_t num_classes = 0;
    std::size_t k = 0;
    std::map<std::vector<ClassId>, double> probabilities;
    std::uint64_t sample_count = 0;

    double probability(std::vector<ClassId> classes) const {
        std::sort(classes.begin(), classes.end());
        const auto it = probabilities.find(classes);
        return it == probabilities.end() ? 0.0 : it->second;
    }
    double total() const {
        double s = 0.0;
        for (const auto& [set, p] : probabilities) s += p;
        return s;
    }
};

/// CSV with columns class_ids (ascending, ';'-joined) and probability
/// (12 decimals), sorted by descending probability.
inline void write_distribution_csv(std::ostream& out, const SetDistribution& dist) {
    std::vector<std::pair<const std::vector<ClassId>*, double>> rows;
    for (const auto& [set, p] : dist.probabilities) rows.emplace_back(&set, p);
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    out << "class_ids,probability\n";
    for (const auto& [set, p] : rows) {
        for (std::size_t i = 0; i < set->size(); ++i) out << (i ? ";" : "") << (*set)[i];
        out << ',' << format_fixed(p, 12) << '\n';
    }
}

/// Exact class-pair distribution: P(L) proportional to the product of C(i,j)
/// over all pairs in L.
inline SetDistribution exact_cp_distribution(const PotentialMatrix& matrix, std::size_t k,
                                             std::uint64_t cap = kDefaultEnumerationCap) {
    const auto n = matrix.num_classes();
    if (k < 2 || k > n) throw std::invalid_argument("k must lie in [2, num_classes]");
    if (binomial(n, k) > cap) throw EnumerationCapExceeded("exact cp distribution exceeds the enumeration cap");

    std::vector<std::vector<ClassId>> sets;
    std::vector<double> log_weights;
    std::vector<ClassId> idx(k);
    std::iota(idx.begin(), idx.end(), ClassId{0});
    while (true) {
        double lw = 0.0;
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b) lw += matrix.log_potential(idx[a], idx[b]);
        sets.push_back(idx);
        log_weights.push_back(lw);
        // next combination in lexicographic order
        std::size_t pos = k;
        while (pos > 0 && idx[pos - 1] == n - k + pos - 1) --pos;
        if (pos == 0) break;
        ++idx[pos - 1];
        for (std::size_t j = pos; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
    const double log_z = log_sum_exp(log_weights);
    SetDistribution dist{n, k, {}, 0};
    for (std::size_t s = 0; s < sets.size(); ++s) dist.probabilities.emplace(std::move(sets[s]), std::exp(log_weights[s] - log_z));
    return dist;
}

/**
 * Greedy class-pair sampler. Draws an unordered pair with probability
 * proportional to C(i,j), then repeatedly adds a class c outside the chosen
 * set with probability proportional to the product of C(c,j) over chosen j.
 *
 * Each candidate keeps one running score, multiplied by the matrix's cached
 * exp(log C(c, newest) - shift) after every draw and rescaled so the largest
 * score is 1; a step therefore costs O(num_classes) and no exponentials.
 * If the largest product drops below 1e-250 (potentials far below the
 * matrix's shift), the scores are rebuilt from log-potentials instead.
 */
inline CategorySet sample_task_gcp(const PotentialMatrix& matrix, std::size_t k, Rng& rng) {
    const auto n = matrix.num_classes();
    if (k < 2 || k > n) throw std::invalid_argument("k must lie in [2, num_classes]");

    std::vector<double> row_sums(n);
    for (std::size_t i = 0; i < n; ++i) row_sums[i] = matrix.scaled_row_sum(i);
    const ClassId first = draw_categorical(row_sums, rng);
    const ClassId second = draw_categorical(matrix.scaled_row(first), row_sums[first], rng);

    std::vector<ClassId> chosen{first, second};
    chosen.reserve(k);
    if (k == 2) return CategorySet(std::move(chosen));

    std::vector<double> scores(n, 1.0);
    std::vector<ClassId> absorbed;
    absorbed.reserve(k);
    auto rebuild_from_logs = [&] {
        std::vector<double> logs(n, -std::numeric_limits<double>::infinity());
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            if (std::find(absorbed.begin(), absorbed.end(), c) != absorbed.end()) continue;
            double l = 0.0;
            for (auto j : absorbed) l += matrix.log_potential(c, j);
            logs[c] = l;
            top = std::max(top, l);
        }
        for (std::size_t c = 0; c < n; ++c) scores[c] = std::exp(logs[c] - top);
    };
    auto absorb = [&](ClassId newest) {
        absorbed.push_back(newest);
        const auto row = matrix.scaled_row(newest);  // row[newest] == 0 removes it
        double top = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            scores[c] *= row[c];
            top = std::max(top, scores[c]);
        }
        if (top > 1e-250) {
            const double inv = 1.0 / top;
            for (auto& s : scores) s *= inv;
        } else {
            rebuild_from_logs();
        }
        double total = 0.0;
        for (double s : scores) total += s;
        return total;
    };
    absorb(first);
    double total = absorb(second);
    while (true) {
        const ClassId next = draw_categorical(scores, total, rng);
        chosen.push_back(next);
        if (chosen.size() == k) break;
        total = absorb(next);
    }
    return CategorySet(std::move(chosen));
}

/**
 * Exact law of sample_task_gcp, summed over every admissible draw order of
 * every K-subset (an unordered first pair, then each remaining ordering),
 * with each step's own normalizer.
 */
inline SetDistribution exact_gcp_distribution(const PotentialMatrix& matrix, std::size_t k,
                                              std::uint64_t cap = kDefaultEnumerationCap) {
    const auto n = matrix.num_classes();
    if (k < 2 || k > n) throw std::invalid_argument("k must lie in [2, num_classes]");
    if (k > 6) throw EnumerationCapExceeded("exact gcp distribution supports k <= 6");
    std::uint64_t orderings = 1;
    for (std::uint64_t f = 3; f <= k; ++f) orderings *= f;  // k!/2
    const auto sets = binomial(n, k);
    if (sets > cap || sets * orderings > cap)
        throw EnumerationCapExceeded("exact gcp distribution exceeds the enumeration cap");

    std::vector<double> pair_logs;
    for (ClassId i = 0; i < n; ++i)
        for (ClassId j = i + 1; j < n; ++j) pair_logs.push_back(matrix.log_potential(i, j));
    const double log_z_pair = log_sum_exp(pair_logs);

    SetDistribution dist{n, k, {}, 0};
    std::vector<ClassId> chosen;
    std::vector<bool> taken(n, false);

    // depth-first over draw sequences; `log_p` is the probability of the prefix
    std::function<void(double)> extend = [&](double log_p) {
        if (chosen.size() == k) {
            auto key = chosen;
            std::sort(key.begin(), key.end());
            dist.probabilities[key] += std::exp(log_p);
            return;
        }
        std::vector<ClassId> candidates;
        std::vector<double> cand_logs;
        for (ClassId c = 0; c < n; ++c) {
            if (taken[c]) continue;
            double s = 0.0;
            for (auto j : chosen) s += matrix.log_potential(c, j);
            candidates.push_back(c);
            cand_logs.push_back(s);
        }
        const double log_z = log_sum_exp(cand_logs);
        for (std::size_t idx = 0; idx < candidates.size(); ++idx) {
            const auto c = candidates[idx];
            chosen.push_back(c);
            taken[c] = true;
            extend(log_p + cand_logs[idx] - log_z);
            taken[c] = false;
            chosen.pop_back();
        }
    };

    for (ClassId i = 0; i < n; ++i)
        for (ClassId j = i + 1; j < n; ++j) {
            chosen = {i, j};
            taken[i] = taken[j] = true;
            extend(matrix.log_potential(i, j) - log_z_pair);
            taken[i] = taken[j] = false;
        }
    return dist;
}

/// Total variation distance; sets missing from one table count as 0.
inline double distribution_distance(const SetDistribution& a, const SetDistribution& b) {
    if (a.num_classes != b.num_classes || a.k != b.k)
        throw std::invalid_argument("distributions are over different set universes");
    double sum = 0.0;
    auto ia = a.probabilities.begin();
    auto ib = b.probabilities.begin();
    while (ia != a.probabilities.end() || ib != b.probabilities.end()) {
        if (ib == b.probabilities.end() || (ia != a.probabilities.end() && ia->first < ib->first)) {
            sum += std::abs(ia->second);
            ++ia;
        } else if (ia == a.probabilities.end() || ib->first < ia->first) {
            sum += std::abs(ib->second);
            ++ib;
        } else {
            sum += std::abs(ia->second - ib->second);
            ++ia;
            ++ib;
        }
    }
    return 0.5 * sum;
}

/// Frequency table of `draws` category sets produced by `sampler(rng)`.
template <typename Sampler>
SetDistribution empirical_distribution(Sampler&& sampler, std::size_t num_classes, std::size_t k,
                                       std::uint64_t draws, Rng& rng) {
    if (draws == 0) throw std::invalid_argument("need at least one draw");
    std::map<std::vector<ClassId>, std::uint64_t> counts;
    for (std::uint64_t d = 0; d < draws; ++d) {
        const CategorySet set = sampler(rng);
        ++counts[set.sorted()];
    }
    SetDistribution dist{num_classes, k, {}, draws};
    for (const auto& [set, count] : counts)
        dist.probabilities.emplace(set, static_cast<double>(count) / static_cast<double>(draws));
    return dist;
}

struct ChiSquareResult {
    double statistic = 0.0;
    std::size_t degrees_of_freedom = 0;
    double p_value = 1.0;
};

/// Pearson goodness of fit of an empirical table against a reference law.
/// Draws landing on a zero-probability set give p_value 0.
inline ChiSquareResult chi_square(const SetDistribution& empirical, const SetDistribution& reference) {
    if (empirical.sample_count == 0) throw std::invalid_argument("chi-square needs an empirical distribution");
    if (empirical.num_classes != reference.num_classes || empirical.k != reference.k)
        throw std::invalid_argument("distributions are over different set universes");
    const auto draws = static_cast<double>(empirical.sample_count);
    ChiSquareResult r;
    std::size_t cells = 0;
    for (const auto& [set, p] : reference.probabilities) {
        if (p <= 0.0) continue;
        ++cells;
        const auto it = empirical.probabilities.find(set);
        const double observed = it == empirical.probabilities.end() ? 0.0 : it->second * draws;
        const double expected = p * draws;
        r.statistic += (observed - expected) * (observed - expected) / expected;
    }
    for (const auto& [set, q] : empirical.probabilities) {
        const auto it = reference.probabilities.find(set);
        if (q > 0.0 && (it == reference.probabilities.end() || it->second <= 0.0)) {
            r.statistic = std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
    }
    r.degrees_of_freedom = cells > 0 ? cells - 1 : 0;
    if (std::isfinite(r.statistic) && r.degrees_of_freedom > 0) {
        boost::math::chi_squared_distribution<double> chi(static_cast<double>(r.degrees_of_freedom));
        r.p_value = boost::math::cdf(boost::math::complement(chi, r.statistic));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Class and instance weights

struct ClassWeights {
    std::vector<double> weights;
};

struct InstanceWeights {
    std::vector<double> weights;
};

/// Uniform K-subset in random order (partial Fisher-Yates).
inline CategorySet sample_classes_uniform(std::size_t num_classes, std::size_t k, Rng& rng) {
    if (k < 2 || k > num_classes) throw std::invalid_argument("k must lie in [2, num_classes]");
    std::vector<ClassId> idx(num_classes);
    std::iota(idx.begin(), idx.end(), ClassId{0});
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.uniform_index(num_classes - i)]);
    idx.resize(k);
    return CategorySet(std::move(idx));
}

/// Sequential weighted draws without replacement; each draw is proportional
/// to the weights of the classes not yet drawn. Works for any k >= 1.
inline std::vector<ClassId> draw_without_replacement(std::span<const double> weights, std::size_t k, Rng& rng) {
    std::size_t positive = 0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be finite and nonnegative");
        positive += w > 0.0 ? 1 : 0;
    }
    if (k > positive) throw std::invalid_argument("k exceeds the number of positive weights");
    std::vector<double> remaining(weights.begin(), weights.end());
    std::vector<ClassId> out;
    out.reserve(k);
    for (std::size_t d = 0; d < k; ++d) {
        const auto c = draw_categorical(remaining, rng);
        out.push_back(c);
        remaining[c] = 0.0;
    }
    return out;
}

inline CategorySet sample_classes_without_replacement(const ClassWeights& weights, std::size_t k, Rng& rng) {
    return CategorySet(draw_without_replacement(weights.weights, k, rng));
}

/// Multiplicative instance update: w(i) <- w(i)^tau * exp(alpha * (1 - p_i)),
/// renormalized to sum 1.
inline InstanceWeights instance_weight_update(const InstanceWeights& weights, std::span<const double> correct_prob,
                                              double alpha, double tau) {
    if (weights.weights.size() != correct_prob.size())
        throw std::invalid_argument("weights and probabilities differ in length");
    if (std::none_of(weights.weights.begin(), weights.weights.end(), [](double w) { return w > 0.0; }))
        throw std::invalid_argument("instance weights are all zero");
    const auto n = weights.weights.size();
    std::vector<double> exponent(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = correct_prob[i];
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0, 1]");
        if (weights.weights[i] < 0.0) throw std::invalid_argument("negative instance weight");
        exponent[i] = alpha * (1.0 - p);
    }
    const double top = *std::max_element(exponent.begin(), exponent.end());
    InstanceWeights out{std::vector<double>(n)};
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.weights[i] = std::pow(weights.weights[i], tau) * std::exp(exponent[i] - top);
        total += out.weights[i];
    }
    if (!(total > 0.0) || !std::isfinite(total)) throw std::domain_error("instance update lost all mass");
    for (auto& w : out.weights) w /= total;
    return out;
}

/// Per-way difficulty score of each episode class:
/// (sum over queries of [c != y] p(c|q) + [c == y] (1 - p(c|q))) / (N K).
inline std::vector<double> class_difficulty_scores(const PredictionBatch& predictions, const Episode& episode) {
    validate_predictions(predictions, episode);
    const auto k = episode.k_way();
    std::vector<double> scores(k, 0.0);
    for (std::size_t q = 0; q < episode.query.size(); ++q) {
        const auto y = episode.query[q].way;
        for (std::size_t c = 0; c < k; ++c) {
            const double p = predictions.probs(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(c));
            scores[c] += c == y ? 1.0 - p : p;
        }
    }
    const double norm = static_cast<double>(episode.n_query * k);
    for (auto& s : scores) s /= norm;
    return scores;
}

/// Class-based update: w(c) <- w(c)^tau * exp(alpha * score(c)) for the
/// episode's classes; other classes keep their weight. Weights are rescaled
/// as a whole only if they approach overflow, which leaves the sampling law
/// unchanged.
inline ClassWeights class_weight_update(const ClassWeights& weights, const Episode& episode,
                                        const PredictionBatch& predictions, double alpha, double tau) {
    for (auto c : episode.categories)
        if (c >= weights.weights.size()) throw std::out_of_range("episode class outside class weights");
    const auto scores = class_difficulty_scores(predictions, episode);
    ClassWeights out = weights;
    for (std::size_t w = 0; w < episode.k_way(); ++w) {
        auto& v = out.weights[episode.categories[w]];
        v = std::pow(v, tau) * std::exp(alpha * scores[w]);
    }
    const double top = *std::max_element(out.weights.begin(), out.weights.end());
    if (!std::isfinite(top)) throw std::domain_error("class weight update overflowed");
    if (top > 1e200)
        for (auto& v : out.weights) v /= top;
    return out;
}

}  // namespace adatask
