/**
 * @file learner.hpp
 * @brief Prototypical classifier over a linear embedding, plus a fixed
 *        confusion-table learner for deterministic tests.
 *
 * Prototypes are the means of the embedded support points of each class,
 * p_c = W mu_c with mu_c the raw support mean, and a query q gets
 *
 *     p(c|q) = softmax_c( -|| W q - p_c ||^2 ).
 *
 * With a_nc = q_n - mu_c and g_nc = p(c|q_n) - [c == y_n], the mean negative
 * log-likelihood over the N K queries has gradient
 *
 *     dL/dW = -(2 / NK) * sum_{n,c} g_nc (W a_nc) a_nc^T.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "adatask/csv.hpp"
#include "adatask/episode.hpp"
#include "adatask/rng.hpp"

namespace adatask {

struct LinearEmbedding {
    Eigen::MatrixXd weight;  // e x d
    double learning_rate = 0.01;

    std::size_t embed_dim() const noexcept { return static_cast<std::size_t>(weight.rows()); }
    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(weight.cols()); }

    /// Gaussian init with standard deviation `scale / sqrt(d)`.
    static LinearEmbedding random(std::size_t embed_dim, std::size_t input_dim, double learning_rate, Rng& rng,
                                  double scale = 1.0) {
        if (embed_dim == 0 || input_dim == 0) throw std::invalid_argument("embedding dimensions must be positive");
        LinearEmbedding emb{Eigen::MatrixXd(static_cast<Eigen::Index>(embed_dim), static_cast<Eigen::Index>(input_dim)),
                            learning_rate};
        const double sd = scale / std::sqrt(static_cast<double>(input_dim));
        for (Eigen::Index r = 0; r < emb.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < emb.weight.cols(); ++c) emb.weight(r, c) = sd * rng.normal();
        return emb;
    }
};

namespace detail {

struct EpisodeMatrices {
    Eigen::MatrixXd queries;      // d x NK
    Eigen::MatrixXd support;      // d x MK
    Eigen::MatrixXd averaging;    // MK x K, column c averages class c's support
    Eigen::MatrixXd class_means;  // d x K, raw support means
};

inline EpisodeMatrices episode_matrices(const Episode& episode, std::size_t dim) {
    const auto k = static_cast<Eigen::Index>(episode.k_way());
    const auto d = static_cast<Eigen::Index>(dim);
    const auto ns = static_cast<Eigen::Index>(episode.support.size());
    EpisodeMatrices m{Eigen::MatrixXd(d, static_cast<Eigen::Index>(episode.query.size())), Eigen::MatrixXd(d, ns),
                      Eigen::MatrixXd::Zero(ns, k), {}};
    for (std::size_t i = 0; i < episode.query.size(); ++i) {
        const auto& f = episode.query[i].point->features;
        if (f.size() != d) throw std::invalid_argument("query feature dimension does not match embedding");
        m.queries.col(static_cast<Eigen::Index>(i)) = f;
    }
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < episode.support.size(); ++i) {
        const auto& s = episode.support[i];
        if (s.point->features.size() != d) throw std::invalid_argument("support feature dimension does not match embedding");
        m.support.col(static_cast<Eigen::Index>(i)) = s.point->features;
        m.averaging(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s.way)) = 1.0;
        counts[static_cast<Eigen::Index>(s.way)] += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        if (counts[c] == 0.0) throw std::invalid_argument("episode class without support points");
        m.averaging.col(c) /= counts[c];
    }
    m.class_means = m.support * m.averaging;
    return m;
}

// Row-wise softmax of -squared distances, max-subtracted. Distances come
// from |z|^2 + |p|^2 - 2 z.p so the bulk of the work is one product.
inline PredictionBatch softmax_neg_distances(const Eigen::MatrixXd& embedded_queries,
                                             const Eigen::MatrixXd& prototypes) {
    PredictionBatch batch{2.0 * (embedded_queries.transpose() * prototypes)};
    batch.probs.colwise() -= embedded_queries.colwise().squaredNorm().transpose();
    batch.probs.rowwise() -= prototypes.colwise().squaredNorm();
    for (Eigen::Index n = 0; n < batch.probs.rows(); ++n) {
        const double top = batch.probs.row(n).maxCoeff();
        batch.probs.row(n) = (batch.probs.row(n).array() - top).exp();
        batch.probs.row(n) /= batch.probs.row(n).sum();
    }
    return batch;
}

}  // namespace detail

inline PredictionBatch forward(const LinearEmbedding& embedding, const Episode& episode) {
    const auto m = detail::episode_matrices(episode, embedding.input_dim());
    const Eigen::MatrixXd prototypes = (embedding.weight * m.support) * m.averaging;
    return detail::softmax_neg_distances(embedding.weight * m.queries, prototypes);
}

/// Mean negative log-likelihood of the true way; probabilities floored at 1e-12.
inline double episode_loss(const PredictionBatch& batch, const Episode& episode) {
    if (batch.num_queries() != episode.query.size()) throw std::invalid_argument("batch not aligned with episode queries");
    if (episode.query.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t n = 0; n < episode.query.size(); ++n) {
        const double p = batch.probs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(episode.query[n].way));
        total -= std::log(std::max(p, 1e-12));
    }
    return total / static_cast<double>(episode.query.size());
}

struct LossAndGradient {
    PredictionBatch predictions;
    double loss = 0.0;
    Eigen::MatrixXd gradient;  // e x d
};

inline LossAndGradient loss_and_gradient(const Eigen::MatrixXd& weight, const Episode& episode) {
    const auto m = detail::episode_matrices(episode, static_cast<std::size_t>(weight.cols()));
    const Eigen::MatrixXd embedded = weight * m.queries;     // e x NK
    const Eigen::MatrixXd prototypes = (weight * m.support) * m.averaging;  // e x K
    LossAndGradient out{detail::softmax_neg_distances(embedded, prototypes), 0.0, {}};
    out.loss = episode_loss(out.predictions, episode);

    Eigen::MatrixXd g = out.predictions.probs;  // NK x K
    for (std::size_t n = 0; n < episode.query.size(); ++n)
        g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(episode.query[n].way)) -= 1.0;
    const Eigen::VectorXd g_col = g.colwise().sum().transpose();

    // sum_{n,c} g_nc (z_n - p_c)(q_n - mu_c)^T expanded; the z_n q_n^T term
    // carries sum_c g_nc = 0 and is dropped.
    // Products are grouped so that no term costs more than O(NK * K * e)
    // or O(NK * e * d).
    const Eigen::MatrixXd zg = embedded * g;                             // e x K
    const Eigen::MatrixXd pgt = prototypes * g.transpose();              // e x NK
    const Eigen::MatrixXd pd = prototypes * g_col.asDiagonal();          // e x K
    Eigen::MatrixXd acc = (pd - zg) * m.class_means.transpose();
    acc.noalias() -= pgt * m.queries.transpose();
    out.gradient = (-2.0 / static_cast<double>(episode.query.size())) * acc;
    return out;
}

struct TrainStepResult {
    LinearEmbedding embedding;    // after the SGD step
    PredictionBatch predictions;  // before the step
    double loss = 0.0;            // before the step
};

/// One plain SGD step on the episode loss.
inline TrainStepResult train_step(const LinearEmbedding& embedding, const Episode& episode) {
    auto lg = loss_and_gradient(embedding.weight, episode);
    if (!lg.gradient.allFinite() || !std::isfinite(lg.loss))
        throw std::domain_error("non-finite gradient; learning rate too large?");
    TrainStepResult out{embedding, std::move(lg.predictions), lg.loss};
    out.embedding.weight -= embedding.learning_rate * lg.gradient;
    if (!out.embedding.weight.allFinite()) throw std::domain_error("non-finite weights after update");
    return out;
}

/// Fixed confusion table: row t holds the (unnormalized) mass a query of
/// class t puts on each candidate class.
struct OracleLearner {
    Eigen::MatrixXd confusion;
};

inline PredictionBatch oracle_forward(const OracleLearner& oracle, const Episode& episode) {
    const auto k = episode.k_way();
    for (auto c : episode.categories)
        if (c >= static_cast<std::size_t>(oracle.confusion.rows()) || c >= static_cast<std::size_t>(oracle.confusion.cols()))
            throw std::out_of_range("class missing from oracle table");
    PredictionBatch batch{Eigen::MatrixXd(static_cast<Eigen::Index>(episode.query.size()), static_cast<Eigen::Index>(k))};
    for (std::size_t n = 0; n < episode.query.size(); ++n) {
        const auto truth = episode.categories[episode.query[n].way];
        double total = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double mass = oracle.confusion(static_cast<Eigen::Index>(truth), static_cast<Eigen::Index>(episode.categories[c]));
            if (!(mass >= 0.0)) throw std::invalid_argument("oracle mass must be nonnegative");
            batch.probs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)) = mass;
            total += mass;
        }
        if (!(total > 0.0)) throw std::invalid_argument("oracle row has no mass on the episode's classes");
        batch.probs.row(static_cast<Eigen::Index>(n)) /= total;
    }
    return batch;
}

// Weight checkpoint: `shape,<rows>,<cols>` then one CSV row per matrix row.

inline void save_weights_csv(std::ostream& out, const Eigen::MatrixXd& w) {
    out << "shape," << w.rows() << ',' << w.cols() << '\n';
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) out << (c ? "," : "") << format_double(w(r, c));
        out << '\n';
    }
}

inline Eigen::MatrixXd load_weights_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("weights csv: missing shape header");
    const auto head = split_csv_line(line);
    if (head.size() != 3 || head[0] != "shape") throw std::runtime_error("weights csv: bad shape header");
    const auto rows = static_cast<Eigen::Index>(parse_unsigned(head[1]));
    const auto cols = static_cast<Eigen::Index>(parse_unsigned(head[2]));
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) throw std::runtime_error("weights csv: truncated");
        const auto cells = split_csv_line(line);
        if (static_cast<Eigen::Index>(cells.size()) != cols) throw std::runtime_error("weights csv: ragged row");
        for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = parse_double(cells[static_cast<std::size_t>(c)]);
    }
    return w;
}

}  // namespace adatask
