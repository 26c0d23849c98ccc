/**
 * @file episode.hpp
 * @brief Few-shot data model: class-indexed datasets, category sets and
 *        K-way-M-shot episodes.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "adatask/csv.hpp"
#include "adatask/rng.hpp"

namespace adatask {

/// Index of a class within a dataset (or of a row of a potential matrix).
using ClassId = std::size_t;

struct LabeledPoint {
    Eigen::VectorXd features;
    ClassId label = 0;  // global label, survives meta_split
};

/// Ordered list of K distinct classes. Order is the sampling sequence;
/// equality through `same_set` ignores it.
class CategorySet {
public:
    CategorySet() = default;
    explicit CategorySet(std::vector<ClassId> classes) : classes_(std::move(classes)) {
        if (classes_.size() < 2) throw std::invalid_argument("category set needs at least 2 classes");
        auto sorted = classes_;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("category set contains duplicate classes");
    }

    std::size_t size() const noexcept { return classes_.size(); }
    ClassId operator[](std::size_t i) const { return classes_[i]; }
    const std::vector<ClassId>& classes() const noexcept { return classes_; }
    auto begin() const noexcept { return classes_.begin(); }
    auto end() const noexcept { return classes_.end(); }

    std::vector<ClassId> sorted() const {
        auto out = classes_;
        std::sort(out.begin(), out.end());
        return out;
    }
    bool contains(ClassId c) const { return std::find(begin(), end(), c) != end(); }
    bool same_set(const CategorySet& other) const { return sorted() == other.sorted(); }

private:
    std::vector<ClassId> classes_;
};

/// Per-class point pools of identical size L and dimension d.
class ClassIndexedDataset {
public:
    ClassIndexedDataset() = default;
    explicit ClassIndexedDataset(std::vector<std::vector<LabeledPoint>> pools)
        : pools_(std::move(pools)) {
        if (pools_.empty()) throw std::invalid_argument("dataset has no classes");
        const auto pool_size = pools_.front().size();
        if (pool_size == 0) throw std::invalid_argument("dataset pools are empty");
        dim_ = static_cast<std::size_t>(pools_.front().front().features.size());
        for (const auto& pool : pools_) {
            if (pool.size() != pool_size) throw std::invalid_argument("dataset pools are not rectangular");
            const auto label = pool.front().label;
            for (const auto& p : pool) {
                if (static_cast<std::size_t>(p.features.size()) != dim_)
                    throw std::invalid_argument("inconsistent feature dimension");
                if (p.label != label) throw std::invalid_argument("pool mixes labels");
                if (!p.features.allFinite()) throw std::invalid_argument("non-finite feature");
            }
        }
    }

    std::size_t num_classes() const noexcept { return pools_.size(); }
    std::size_t pool_size() const noexcept { return pools_.empty() ? 0 : pools_.front().size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<LabeledPoint>& pool(ClassId c) const { return pools_.at(c); }
    ClassId global_label(ClassId c) const { return pools_.at(c).front().label; }

    std::vector<ClassId> global_labels() const {
        std::vector<ClassId> out;
        out.reserve(pools_.size());
        for (const auto& pool : pools_) out.push_back(pool.front().label);
        return out;
    }

private:
    std::vector<std::vector<LabeledPoint>> pools_;
    std::size_t dim_ = 0;
};

/// Reference to one dataset point placed in an episode.
struct EpisodePoint {
    const LabeledPoint* point = nullptr;
    std::size_t way = 0;         // position of the class within the category set
    std::size_t pool_index = 0;  // index within the class pool
};

/// K-way-M-shot task. Support and query are stored way-major: entry
/// `w * m_shot + i` of the support (resp. `w * n_query + i` of the query)
/// belongs to categories[w]. Points are referenced, so the dataset must
/// outlive the episode.
struct Episode {
    CategorySet categories;
    std::vector<EpisodePoint> support;
    std::vector<EpisodePoint> query;
    std::size_t m_shot = 0;
    std::size_t n_query = 0;

    std::size_t k_way() const noexcept { return categories.size(); }
};

/// Per-query probability vectors over the episode's K ways; row n matches
/// Episode::query[n].
struct PredictionBatch {
    Eigen::MatrixXd probs;

    std::size_t num_queries() const noexcept { return static_cast<std::size_t>(probs.rows()); }
    std::size_t num_ways() const noexcept { return static_cast<std::size_t>(probs.cols()); }
};

/// Checks that `batch` is a well-formed prediction for `episode`.
inline void validate_predictions(const PredictionBatch& batch, const Episode& episode) {
    const auto k = episode.k_way();
    if (batch.num_queries() != k * episode.n_query || episode.query.size() != k * episode.n_query)
        throw std::invalid_argument("prediction count does not match N*K queries");
    if (batch.num_ways() != k) throw std::invalid_argument("probability vector has wrong arity");
    for (Eigen::Index r = 0; r < batch.probs.rows(); ++r) {
        if ((batch.probs.row(r).array() < 0.0).any() || !batch.probs.row(r).allFinite())
            throw std::invalid_argument("probability vector has negative or non-finite entries");
        if (std::abs(batch.probs.row(r).sum() - 1.0) > 1e-6)
            throw std::invalid_argument("probability vector does not sum to 1");
    }
}

/// Samples m support and n query points per class, without replacement
/// within each class pool.
inline Episode build_episode(const ClassIndexedDataset& dataset, const CategorySet& categories,
                             std::size_t m, std::size_t n, Rng& rng) {
    if (m == 0 || n == 0) throw std::invalid_argument("m and n must be positive");
    if (m + n > dataset.pool_size())
        throw std::invalid_argument("pool exhausted: m + n exceeds the per-class pool size");
    for (auto c : categories)
        if (c >= dataset.num_classes()) throw std::out_of_range("category outside dataset range");

    Episode ep;
    ep.categories = categories;
    ep.m_shot = m;
    ep.n_query = n;
    const auto k = categories.size();
    ep.support.resize(k * m);
    ep.query.resize(k * n);

    std::vector<std::size_t> idx(dataset.pool_size());
    for (std::size_t w = 0; w < k; ++w) {
        const auto& pool = dataset.pool(categories[w]);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        // partial Fisher-Yates: first m+n slots become a uniform sample
        for (std::size_t i = 0; i < m + n; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.uniform_index(idx.size() - i));
            std::swap(idx[i], idx[j]);
        }
        for (std::size_t i = 0; i < m; ++i) ep.support[w * m + i] = {&pool[idx[i]], w, idx[i]};
        for (std::size_t i = 0; i < n; ++i) ep.query[w * n + i] = {&pool[idx[m + i]], w, idx[m + i]};
    }
    return ep;
}

/// Class-level partition: the first round(fraction * C) classes train, the
/// rest test. Pools are copied untouched.
inline std::pair<ClassIndexedDataset, ClassIndexedDataset> meta_split(const ClassIndexedDataset& dataset,
                                                                      double train_fraction,
                                                                      std::size_t min_classes = 2) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
        throw std::invalid_argument("train fraction must lie in [0, 1]");
    const auto total = dataset.num_classes();
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(total)));
    if (n_train < min_classes || total - n_train < min_classes)
        throw std::invalid_argument("meta split leaves a side with fewer than " + std::to_string(min_classes) +
                                    " classes");
    std::vector<std::vector<LabeledPoint>> train, test;
    for (ClassId c = 0; c < total; ++c) (c < n_train ? train : test).push_back(dataset.pool(c));
    return {ClassIndexedDataset(std::move(train)), ClassIndexedDataset(std::move(test))};
}

// CSV: header `label,f0,...,f{d-1}`, one row per point.

inline void save_dataset_csv(std::ostream& out, const ClassIndexedDataset& dataset) {
    out << "label";
    for (std::size_t f = 0; f < dataset.dim(); ++f) out << ",f" << f;
    out << '\n';
    for (ClassId c = 0; c < dataset.num_classes(); ++c) {
        for (const auto& p : dataset.pool(c)) {
            out << p.label;
            for (Eigen::Index f = 0; f < p.features.size(); ++f) out << ',' << format_double(p.features[f]);
            out << '\n';
        }
    }
}

inline ClassIndexedDataset load_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset csv: missing header");
    const auto header = split_csv_line(line);
    if (header.empty() || header.front() != "label") throw std::runtime_error("dataset csv: first column must be label");
    const auto dim = header.size() - 1;
    if (dim == 0) throw std::runtime_error("dataset csv: no feature columns");
    for (std::size_t f = 0; f < dim; ++f)
        if (header[f + 1] != "f" + std::to_string(f)) throw std::runtime_error("dataset csv: bad feature header");

    std::map<ClassId, std::vector<LabeledPoint>> by_label;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != dim + 1)
            throw std::runtime_error("dataset csv: line " + std::to_string(line_no) + " has wrong column count");
        LabeledPoint p;
        p.label = static_cast<ClassId>(parse_unsigned(cells[0]));
        p.features.resize(static_cast<Eigen::Index>(dim));
        for (std::size_t f = 0; f < dim; ++f) p.features[static_cast<Eigen::Index>(f)] = parse_double(cells[f + 1]);
        by_label[p.label].push_back(std::move(p));
    }
    std::vector<std::vector<LabeledPoint>> pools;
    for (auto& [label, pool] : by_label) pools.push_back(std::move(pool));
    return ClassIndexedDataset(std::move(pools));
}

}  // namespace adatask
