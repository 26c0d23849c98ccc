/**
 * @file synthdata.hpp
 * @brief Synthetic class-cluster datasets with built-in confusable pairs.
 *
 * Classes are grouped into superclusters. Supercluster centers are spread
 * widely, class centers narrowly around their supercluster, and points are
 * isotropic Gaussian noise around class centers, so classes sharing a
 * supercluster are the hard pairs by construction.
 */

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "adatask/episode.hpp"
#include "adatask/rng.hpp"

namespace adatask {

struct ClusterSpec {
    std::size_t num_classes = 25;
    std::size_t points_per_class = 60;
    std::size_t dim = 16;
    std::size_t num_superclusters = 5;
    double within_supercluster_spread = 1.0;
    double between_supercluster_spread = 8.0;
    double noise_sigma = 1.6;
    std::uint64_t seed = 1;

    void validate() const {
        if (num_classes < 2) throw std::invalid_argument("cluster spec needs at least 2 classes");
        if (points_per_class == 0 || dim == 0) throw std::invalid_argument("cluster spec needs points and dimensions");
        if (num_superclusters == 0 || num_superclusters > num_classes)
            throw std::invalid_argument("num_superclusters must lie in [1, num_classes]");
        if (!(within_supercluster_spread > 0.0) || !(between_supercluster_spread > within_supercluster_spread))
            throw std::invalid_argument("need between_supercluster_spread > within_supercluster_spread > 0");
        if (!(noise_sigma > 0.0)) throw std::invalid_argument("noise_sigma must be positive");
    }
};

/// Latent geometry of a generated dataset, indexed by global class label.
struct ClusterStructure {
    std::vector<std::size_t> supercluster;        // class -> supercluster
    std::vector<Eigen::VectorXd> class_centers;   // class -> center
};

namespace detail {
inline Eigen::VectorXd gaussian_vector(std::size_t dim, double scale, Rng& rng) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * rng.normal();
    return v;
}
}  // namespace detail

/// Supercluster assignment (balanced, randomly permuted) and class centers.
inline ClusterStructure cluster_structure(const ClusterSpec& spec) {
    spec.validate();
    Rng rng = Rng(spec.seed).split(0);
    ClusterStructure s;
    s.supercluster.resize(spec.num_classes);
    for (std::size_t c = 0; c < spec.num_classes; ++c) s.supercluster[c] = c % spec.num_superclusters;
    for (std::size_t i = spec.num_classes; i > 1; --i)
        std::swap(s.supercluster[i - 1], s.supercluster[rng.uniform_index(i)]);

    std::vector<Eigen::VectorXd> super_centers;
    for (std::size_t g = 0; g < spec.num_superclusters; ++g)
        super_centers.push_back(detail::gaussian_vector(spec.dim, spec.between_supercluster_spread, rng));
    for (std::size_t c = 0; c < spec.num_classes; ++c)
        s.class_centers.push_back(super_centers[s.supercluster[c]] +
                                  detail::gaussian_vector(spec.dim, spec.within_supercluster_spread, rng));
    return s;
}

/// Deterministic in `spec` (including its seed). Class c carries label c.
inline ClassIndexedDataset generate(const ClusterSpec& spec) {
    const auto structure = cluster_structure(spec);
    Rng rng = Rng(spec.seed).split(1);
    std::vector<std::vector<LabeledPoint>> pools(spec.num_classes);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        pools[c].reserve(spec.points_per_class);
        for (std::size_t i = 0; i < spec.points_per_class; ++i)
            pools[c].push_back({structure.class_centers[c] + detail::gaussian_vector(spec.dim, spec.noise_sigma, rng), c});
    }
    return ClassIndexedDataset(std::move(pools));
}

struct PairTruth {
    ClassId first = 0;   // dataset-local class index
    ClassId second = 0;
    bool same_supercluster = false;
    double center_distance = 0.0;
};

/// Ground-truth confusability of every pair of `dataset`'s classes, which
/// may be any subset (e.g. a meta split) of the classes generated by `spec`.
inline std::vector<PairTruth> confusability_ground_truth(const ClassIndexedDataset& dataset, const ClusterSpec& spec) {
    const auto structure = cluster_structure(spec);
    if (dataset.dim() != spec.dim) throw std::invalid_argument("dataset dimension does not match spec");
    const auto labels = dataset.global_labels();
    for (auto l : labels)
        if (l >= spec.num_classes) throw std::invalid_argument("dataset label outside spec class range");
    std::vector<PairTruth> out;
    for (ClassId i = 0; i < labels.size(); ++i)
        for (ClassId j = i + 1; j < labels.size(); ++j)
            out.push_back({i, j, structure.supercluster[labels[i]] == structure.supercluster[labels[j]],
                           (structure.class_centers[labels[i]] - structure.class_centers[labels[j]]).norm()});
    return out;
}

/// Sidecar CSV `class,supercluster`.
inline void write_supercluster_csv(std::ostream& out, const ClusterSpec& spec) {
    const auto structure = cluster_structure(spec);
    out << "class,supercluster\n";
    for (std::size_t c = 0; c < spec.num_classes; ++c) out << c << ',' << structure.supercluster[c] << '\n';
}

}  // namespace adatask
