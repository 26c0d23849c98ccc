/**
 * @file harness.hpp
 * @brief End-to-end adaptive episodic training, verification and benchmarks.
 *
 * A training session repeats: pick a category set with the configured
 * strategy, build an episode, take one SGD step on the prototypical learner,
 * then feed the step's predictions back into the strategy's adaptive state
 * (class-pair potentials or class weights). Meta-test evaluation always
 * samples held-out classes uniformly.
 */

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <vector>

#include "adatask/csv.hpp"
#include "adatask/episode.hpp"
#include "adatask/learner.hpp"
#include "adatask/potentials.hpp"
#include "adatask/rng.hpp"
#include "adatask/samplers.hpp"
#include "adatask/stats.hpp"
#include "adatask/synthdata.hpp"

namespace adatask {

enum class TrainStrategy { Random, ClassHard, GcpHard, GcpEasy, GcpUncertain };

inline std::string_view to_string(TrainStrategy s) {
    switch (s) {
        case TrainStrategy::Random: return "random";
        case TrainStrategy::ClassHard: return "c-hard";
        case TrainStrategy::GcpHard: return "gcp-hard";
        case TrainStrategy::GcpEasy: return "gcp-easy";
        case TrainStrategy::GcpUncertain: return "gcp-uncertain";
    }
    return "?";
}

inline TrainStrategy parse_train_strategy(std::string_view s) {
    for (auto t : {TrainStrategy::Random, TrainStrategy::ClassHard, TrainStrategy::GcpHard, TrainStrategy::GcpEasy,
                   TrainStrategy::GcpUncertain})
        if (to_string(t) == s) return t;
    throw std::invalid_argument("unknown strategy '" + std::string(s) +
                                "' (expected random, c-hard, gcp-hard, gcp-easy or gcp-uncertain)");
}

inline bool uses_potentials(TrainStrategy s) {
    return s == TrainStrategy::GcpHard || s == TrainStrategy::GcpEasy || s == TrainStrategy::GcpUncertain;
}

inline Strategy potential_strategy(TrainStrategy s) {
    switch (s) {
        case TrainStrategy::GcpEasy: return Strategy::Easy;
        case TrainStrategy::GcpUncertain: return Strategy::Uncertain;
        default: return Strategy::Hard;
    }
}

struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t iterations = 400;
    std::size_t k_way = 5;
    std::size_t m_shot = 5;
    std::size_t n_query = 15;
    double alpha = 1.0;
    double tau = 0.5;
    TrainStrategy strategy = TrainStrategy::GcpHard;
    ClusterSpec cluster{};  // cluster.seed is overwritten by `seed`
    double train_fraction = 0.8;
    std::size_t embed_dim = 16;
    double learning_rate = 0.002;
    double init_scale = 1.0;
    std::size_t eval_every = 50;
    std::size_t snapshot_every = 40;
    std::size_t eval_episodes = 1000;

    ClusterSpec data_spec() const {
        auto spec = cluster;
        spec.seed = seed;
        return spec;
    }

    void validate() const {
        data_spec().validate();
        if (iterations == 0) throw std::invalid_argument("iterations must be positive");
        if (k_way < 2) throw std::invalid_argument("k_way must be at least 2");
        if (m_shot == 0 || n_query == 0) throw std::invalid_argument("m_shot and n_query must be positive");
        if (m_shot + n_query > cluster.points_per_class)
            throw std::invalid_argument("m_shot + n_query exceeds points_per_class");
        if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be positive");
        if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
        if (embed_dim == 0) throw std::invalid_argument("embed_dim must be positive");
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            throw std::invalid_argument("learning_rate must be nonnegative");
        if (eval_every == 0 || snapshot_every == 0) throw std::invalid_argument("eval_every and snapshot_every must be positive");
        if (eval_episodes == 0) throw std::invalid_argument("eval_episodes must be positive");
    }
};

// ---------------------------------------------------------------------------
// key=value configuration

namespace detail {

struct ConfigKey {
    std::string_view name;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_number(std::string_view v) {
    if constexpr (std::is_floating_point_v<T>) {
        return static_cast<T>(parse_double(v));
    } else {
        return static_cast<T>(parse_unsigned(v));
    }
}

template <typename T>
std::string show_number(T v) {
    if constexpr (std::is_floating_point_v<T>) {
        return format_double(v);
    } else {
        return std::to_string(v);
    }
}

#define ADATASK_CONFIG_KEY(key, member)                                                                      \
    ConfigKey {                                                                                              \
        key, [](RunConfig& c, std::string_view v) { c.member = parse_number<decltype(c.member)>(v); },      \
            [](const RunConfig& c) { return show_number(c.member); }                                         \
    }

inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        ADATASK_CONFIG_KEY("seed", seed),
        ADATASK_CONFIG_KEY("iterations", iterations),
        ADATASK_CONFIG_KEY("k_way", k_way),
        ADATASK_CONFIG_KEY("m_shot", m_shot),
        ADATASK_CONFIG_KEY("n_query", n_query),
        ADATASK_CONFIG_KEY("alpha", alpha),
        ADATASK_CONFIG_KEY("tau", tau),
        ConfigKey{"strategy", [](RunConfig& c, std::string_view v) { c.strategy = parse_train_strategy(v); },
                  [](const RunConfig& c) { return std::string(to_string(c.strategy)); }},
        ADATASK_CONFIG_KEY("num_classes", cluster.num_classes),
        ADATASK_CONFIG_KEY("points_per_class", cluster.points_per_class),
        ADATASK_CONFIG_KEY("dim", cluster.dim),
        ADATASK_CONFIG_KEY("num_superclusters", cluster.num_superclusters),
        ADATASK_CONFIG_KEY("within_spread", cluster.within_supercluster_spread),
        ADATASK_CONFIG_KEY("between_spread", cluster.between_supercluster_spread),
        ADATASK_CONFIG_KEY("noise_sigma", cluster.noise_sigma),
        ADATASK_CONFIG_KEY("train_fraction", train_fraction),
        ADATASK_CONFIG_KEY("embed_dim", embed_dim),
        ADATASK_CONFIG_KEY("learning_rate", learning_rate),
        ADATASK_CONFIG_KEY("init_scale", init_scale),
        ADATASK_CONFIG_KEY("eval_every", eval_every),
        ADATASK_CONFIG_KEY("snapshot_every", snapshot_every),
        ADATASK_CONFIG_KEY("eval_episodes", eval_episodes),
    };
    return keys;
}

#undef ADATASK_CONFIG_KEY

}  // namespace detail

inline std::vector<std::string> config_key_names() {
    std::vector<std::string> out;
    for (const auto& k : detail::config_keys()) out.emplace_back(k.name);
    return out;
}

inline void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
    for (const auto& k : detail::config_keys()) {
        if (k.name == key) {
            try {
                k.set(config, trim(value));
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument("config key '" + std::string(key) + "': " + e.what());
            }
            return;
        }
    }
    throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
}

/// Flat `key = value` lines; `#` starts a comment.
inline std::map<std::string, std::string> parse_config_text(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key=value");
        out[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
    }
    return out;
}

inline void apply_settings(RunConfig& config, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) apply_setting(config, k, v);
}

/// Every key in a fixed order, `key=value` per line.
inline void write_config_echo(std::ostream& out, const RunConfig& config) {
    for (const auto& k : detail::config_keys()) out << k.name << '=' << k.get(config) << '\n';
}

// ---------------------------------------------------------------------------
// evaluation

/// Per-episode query accuracy on `episodes` uniformly sampled tasks.
inline std::vector<double> evaluate(const LinearEmbedding& embedding, const ClassIndexedDataset& test,
                                    std::size_t k, std::size_t m, std::size_t n, std::size_t episodes, Rng rng) {
    std::vector<double> acc;
    acc.reserve(episodes);
    for (std::size_t e = 0; e < episodes; ++e) {
        const auto cats = sample_classes_uniform(test.num_classes(), k, rng);
        const auto ep = build_episode(test, cats, m, n, rng);
        const auto batch = forward(embedding, ep);
        std::size_t correct = 0;
        for (std::size_t q = 0; q < ep.query.size(); ++q) {
            Eigen::Index best = 0;
            batch.probs.row(static_cast<Eigen::Index>(q)).maxCoeff(&best);
            correct += static_cast<std::size_t>(best) == ep.query[q].way ? 1 : 0;
        }
        acc.push_back(static_cast<double>(correct) / static_cast<double>(ep.query.size()));
    }
    return acc;
}

struct MetricsRow {
    std::size_t iteration = 0;
    double train_loss = 0.0;  // mean over iterations since the previous row
    double eval_accuracy_mean = 0.0;
    double eval_accuracy_ci95 = 0.0;
    double wall_time_ms = 0.0;  // elapsed training time; goes to timing output only
};

struct IterationTiming {
    double sample_ms = 0.0;
    double update_ms = 0.0;     // potential / class-weight update
    double iteration_ms = 0.0;  // sampling + episode + learner step + update
};

/// Spearman correlations of learned log-potentials with ground truth.
struct StructureRecovery {
    double vs_same_supercluster = 0.0;
    double vs_negative_distance = 0.0;
};

inline StructureRecovery structure_recovery(const PotentialMatrix& potentials, const std::vector<PairTruth>& truth) {
    std::vector<double> pot, same, neg_dist;
    for (const auto& t : truth) {
        pot.push_back(potentials.log_potential(t.first, t.second));
        same.push_back(t.same_supercluster ? 1.0 : 0.0);
        neg_dist.push_back(-t.center_distance);
    }
    return {spearman(pot, same), spearman(pot, neg_dist)};
}

// ---------------------------------------------------------------------------
// training session

class TrainingSession {
public:
    explicit TrainingSession(RunConfig config) : config_(std::move(config)) {
        config_.validate();
        const auto spec = config_.data_spec();
        auto split = meta_split(generate(spec), config_.train_fraction, config_.k_way);
        train_ = std::move(split.first);
        test_ = std::move(split.second);
        train_labels_ = train_.global_labels();
        for (auto tl : test_.global_labels())
            if (std::find(train_labels_.begin(), train_labels_.end(), tl) != train_labels_.end())
                throw std::logic_error("meta split leaked a class into both sides");
        is_train_label_.assign(spec.num_classes, false);
        for (auto l : train_labels_) is_train_label_[l] = true;

        const Rng root(config_.seed);
        Rng init_rng = root.split(1);
        task_rng_ = root.split(2);
        episode_rng_ = root.split(3);
        eval_rng_ = root.split(4);
        embedding_ = LinearEmbedding::random(config_.embed_dim, spec.dim, config_.learning_rate, init_rng,
                                             config_.init_scale);
        potentials_.emplace(train_.num_classes());
        class_weights_.weights.assign(train_.num_classes(), 1.0);
        truth_ = confusability_ground_truth(train_, spec);
    }

    const RunConfig& config() const noexcept { return config_; }
    const ClassIndexedDataset& train_set() const noexcept { return train_; }
    const ClassIndexedDataset& test_set() const noexcept { return test_; }
    const LinearEmbedding& embedding() const noexcept { return embedding_; }
    const PotentialMatrix& potentials() const noexcept { return *potentials_; }
    const ClassWeights& class_weights() const noexcept { return class_weights_; }
    const std::vector<PairTruth>& ground_truth() const noexcept { return truth_; }
    std::size_t iteration() const noexcept { return iteration_; }

    CategorySet sample_categories() {
        switch (config_.strategy) {
            case TrainStrategy::Random: return sample_classes_uniform(train_.num_classes(), config_.k_way, task_rng_);
            case TrainStrategy::ClassHard:
                return sample_classes_without_replacement(class_weights_, config_.k_way, task_rng_);
            default: return sample_task_gcp(*potentials_, config_.k_way, task_rng_);
        }
    }

    /// One training iteration; returns the pre-step episode loss.
    double step(IterationTiming* timing = nullptr) {
        using clock = std::chrono::steady_clock;
        const auto t0 = clock::now();
        const auto cats = sample_categories();
        const auto t1 = clock::now();
        const auto episode = build_episode(train_, cats, config_.m_shot, config_.n_query, episode_rng_);
        for (const auto& p : episode.support)
            if (!is_train_label_[p.point->label]) throw std::logic_error("meta-test class in a training episode");
        for (const auto& p : episode.query)
            if (!is_train_label_[p.point->label]) throw std::logic_error("meta-test class in a training episode");

        auto result = train_step(embedding_, episode);
        if (!std::isfinite(result.loss))
            throw std::domain_error("non-finite loss at iteration " + std::to_string(iteration_ + 1));
        embedding_ = std::move(result.embedding);

        const auto t2 = clock::now();
        if (uses_potentials(config_.strategy)) {
            const auto conf = pair_confusion(result.predictions, episode);
            potentials_->apply_update(conf, config_.alpha, config_.tau, potential_strategy(config_.strategy));
        } else if (config_.strategy == TrainStrategy::ClassHard) {
            class_weights_ = class_weight_update(class_weights_, episode, result.predictions, config_.alpha, config_.tau);
        }
        const auto t3 = clock::now();
        ++iteration_;
        if (timing) {
            auto ms = [](auto a, auto b) { return std::chrono::duration<double, std::milli>(b - a).count(); };
            timing->sample_ms = ms(t0, t1);
            timing->update_ms = ms(t2, t3);
            timing->iteration_ms = ms(t0, t3);
        }
        return result.loss;
    }

    std::vector<double> evaluate_now() const {
        return evaluate(embedding_, test_, config_.k_way, config_.m_shot, config_.n_query, config_.eval_episodes,
                        eval_rng_);
    }

    StructureRecovery recovery() const { return structure_recovery(*potentials_, truth_); }

private:
    RunConfig config_;
    ClassIndexedDataset train_, test_;
    std::vector<ClassId> train_labels_;
    std::vector<bool> is_train_label_;
    Rng task_rng_, episode_rng_, eval_rng_;
    LinearEmbedding embedding_;
    std::optional<PotentialMatrix> potentials_;
    ClassWeights class_weights_;
    std::vector<PairTruth> truth_;
    std::size_t iteration_ = 0;
};

struct RunResult {
    std::vector<MetricsRow> metrics;
    std::vector<IterationTiming> timings;
    double final_accuracy = 0.0;
    double final_accuracy_ci95 = 0.0;
    StructureRecovery recovery;
    std::size_t snapshots_written = 0;
};

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << "iteration,train_loss,eval_accuracy_mean,eval_accuracy_ci95\n";
    for (const auto& r : rows)
        out << r.iteration << ',' << format_fixed(r.train_loss, 6) << ',' << format_fixed(r.eval_accuracy_mean, 6) << ','
            << format_fixed(r.eval_accuracy_ci95, 6) << '\n';
}

inline void write_timing_csv(std::ostream& out, const std::vector<IterationTiming>& timings) {
    out << "iteration,sample_ms,update_ms,iteration_ms,wall_time_ms\n";
    double wall = 0.0;
    for (std::size_t i = 0; i < timings.size(); ++i) {
        wall += timings[i].iteration_ms;
        out << i + 1 << ',' << format_fixed(timings[i].sample_ms, 6) << ',' << format_fixed(timings[i].update_ms, 6)
            << ',' << format_fixed(timings[i].iteration_ms, 6) << ',' << format_fixed(wall, 3) << '\n';
    }
}

namespace detail {
inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}
}  // namespace detail

/**
 * Runs the configured number of iterations. With a non-empty `out_dir`,
 * writes metrics.csv, timing.csv, potentials_<iter>.csv every
 * snapshot_every iterations, weights.csv, pairs.csv and config.echo.
 * Evaluation happens every eval_every iterations and after the last one.
 */
inline RunResult run_training(const RunConfig& config, const std::filesystem::path& out_dir = {}) {
    TrainingSession session(config);
    const bool write = !out_dir.empty();
    if (write) {
        std::filesystem::create_directories(out_dir);
        auto echo = detail::open_output(out_dir / "config.echo");
        write_config_echo(echo, session.config());
    }
    const auto labels = session.train_set().global_labels();

    RunResult result;
    result.timings.reserve(config.iterations);
    double loss_sum = 0.0, wall_ms = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t t = 1; t <= config.iterations; ++t) {
        IterationTiming timing;
        loss_sum += session.step(&timing);
        ++loss_count;
        wall_ms += timing.iteration_ms;
        result.timings.push_back(timing);

        if (t % config.snapshot_every == 0) {
            if (write) {
                auto out = detail::open_output(out_dir / ("potentials_" + std::to_string(t) + ".csv"));
                write_snapshot_csv(out, session.potentials(), std::span<const ClassId>(labels));
            }
            ++result.snapshots_written;
        }
        if (t % config.eval_every == 0 || t == config.iterations) {
            const auto acc = session.evaluate_now();
            result.metrics.push_back({t, loss_sum / static_cast<double>(loss_count), mean(acc), ci95(acc), wall_ms});
            loss_sum = 0.0;
            loss_count = 0;
        }
    }
    result.final_accuracy = result.metrics.back().eval_accuracy_mean;
    result.final_accuracy_ci95 = result.metrics.back().eval_accuracy_ci95;
    result.recovery = session.recovery();

    if (write) {
        auto metrics = detail::open_output(out_dir / "metrics.csv");
        write_metrics_csv(metrics, result.metrics);
        auto timing = detail::open_output(out_dir / "timing.csv");
        write_timing_csv(timing, result.timings);
        auto weights = detail::open_output(out_dir / "weights.csv");
        save_weights_csv(weights, session.embedding().weight);
        auto pairs = detail::open_output(out_dir / "pairs.csv");
        pairs << "class_a,class_b,log_potential,same_supercluster,center_distance\n";
        for (const auto& p : session.ground_truth())
            pairs << labels[p.first] << ',' << labels[p.second] << ','
                  << format_fixed(session.potentials().log_potential(p.first, p.second), 6) << ','
                  << (p.same_supercluster ? 1 : 0) << ',' << format_fixed(p.center_distance, 6) << '\n';
    }
    return result;
}

// ---------------------------------------------------------------------------
// greedy vs exact class-pair verification

struct Prop1Row {
    std::string label;
    std::size_t num_classes = 0;
    std::size_t k = 0;
    double total_variation = 0.0;
    double chi_square_p = 1.0;
    double p_gcp_first = 0.0;  // probability of {0, ..., k-1} under each law
    double p_cp_first = 0.0;
};

/// The 4-class matrix on which the greedy law differs from the exact one.
inline PotentialMatrix counterexample_matrix() {
    PotentialMatrix m(4);
    m.set_potential(0, 1, 2.0);
    m.set_potential(0, 2, 3.0);
    m.set_potential(0, 3, 1.0);
    m.set_potential(1, 2, 1.0);
    m.set_potential(1, 3, 4.0);
    m.set_potential(2, 3, 1.0);
    return m;
}

inline Prop1Row compare_laws(std::string label, const PotentialMatrix& matrix, std::size_t k, std::uint64_t draws,
                             Rng& rng) {
    const auto cp = exact_cp_distribution(matrix, k);
    const auto gcp = exact_gcp_distribution(matrix, k);
    Prop1Row row{std::move(label), matrix.num_classes(), k, distribution_distance(cp, gcp), 1.0, 0.0, 0.0};
    std::vector<ClassId> first(k);
    std::iota(first.begin(), first.end(), ClassId{0});
    row.p_gcp_first = gcp.probability(first);
    row.p_cp_first = cp.probability(first);
    if (draws > 0) {
        const auto emp = empirical_distribution([&](Rng& r) { return sample_task_gcp(matrix, k, r); },
                                                matrix.num_classes(), k, draws, rng);
        row.chi_square_p = chi_square(emp, gcp).p_value;
    }
    return row;
}

inline PotentialMatrix random_lognormal_matrix(std::size_t n, double log_sd, Rng& rng) {
    PotentialMatrix m(n);
    for (ClassId i = 0; i < n; ++i)
        for (ClassId j = i + 1; j < n; ++j) m.set_log_potential(i, j, log_sd * rng.normal());
    return m;
}

/**
 * Rows: `num_matrices` random log-normal matrices at (num_classes, k), the
 * same count at k = 2, the constant matrix, and the 4-class counterexample
 * at k = 3. Each row holds TV(exact cp, exact gcp) and, with draws > 0, the
 * chi-square p-value of sampler draws against the exact greedy law.
 */
inline std::vector<Prop1Row> verify_prop1(std::size_t num_classes, std::size_t k, std::size_t num_matrices, Rng& rng,
                                          std::uint64_t draws = 20000) {
    if (num_classes > 8 || k > 5) throw EnumerationCapExceeded("verification supports num_classes <= 8 and k <= 5");
    if (k < 2 || k > num_classes) throw std::invalid_argument("k must lie in [2, num_classes]");
    std::vector<Prop1Row> rows;
    for (std::size_t i = 0; i < num_matrices; ++i) {
        const auto m = random_lognormal_matrix(num_classes, 1.0, rng);
        rows.push_back(compare_laws("lognormal_" + std::to_string(i), m, k, draws, rng));
    }
    for (std::size_t i = 0; i < num_matrices; ++i) {
        const auto m = random_lognormal_matrix(num_classes, 1.0, rng);
        rows.push_back(compare_laws("lognormal_k2_" + std::to_string(i), m, 2, draws, rng));
    }
    rows.push_back(compare_laws("constant", PotentialMatrix(num_classes), k, draws, rng));
    rows.push_back(compare_laws("counterexample", counterexample_matrix(), 3, draws, rng));
    return rows;
}

inline void write_prop1_csv(std::ostream& out, const std::vector<Prop1Row>& rows) {
    out << "matrix,num_classes,k,total_variation,chi_square_p,p_gcp_first_set,p_cp_first_set\n";
    for (const auto& r : rows)
        out << r.label << ',' << r.num_classes << ',' << r.k << ',' << format_double(r.total_variation) << ','
            << format_fixed(r.chi_square_p, 6) << ',' << format_fixed(r.p_gcp_first, 12) << ','
            << format_fixed(r.p_cp_first, 12) << '\n';
}

// ---------------------------------------------------------------------------
// overhead benchmark

struct BenchPoint {
    std::size_t k_way = 5;
    std::size_t m_shot = 5;
    std::size_t embed_dim = 16;
};

struct TimingRow {
    BenchPoint point;
    double random_ms = 0.0;  // wall time per iteration
    double gcp_ms = 0.0;
    double random_sample_ms = 0.0;
    double gcp_sample_ms = 0.0;
    double gcp_update_ms = 0.0;
    /// (random_ms - random_sample_ms + gcp_sample_ms + gcp_update_ms) / random_ms:
    /// the shared episode and learner cost plus each strategy's own sampling
    /// and update cost.
    double factor = 0.0;
    double raw_factor = 0.0;  // gcp_ms / random_ms
};

struct BenchOptions {
    std::size_t warmup = 50;
    std::size_t iterations_per_round = 100;
    std::size_t rounds = 21;
};

/// Synthetic data and learner used for the overhead grid: enough classes
/// for 20-way tasks and a wider input so the learner acts like a per-image
/// backbone.
inline RunConfig default_bench_config() {
    RunConfig cfg;
    cfg.cluster.num_classes = 50;
    cfg.cluster.num_superclusters = 10;
    cfg.cluster.dim = 64;
    cfg.train_fraction = 0.6;
    return cfg;
}

inline std::vector<BenchPoint> default_bench_grid() {
    return {{5, 5, 16}, {10, 5, 16}, {15, 5, 16}, {20, 5, 16}, {5, 5, 64}, {5, 1, 16}, {5, 20, 16}};
}

/**
 * Per-iteration wall time of random vs gcp-hard training. Both sessions run
 * alternately in rounds; each reported time is the minimum over rounds of
 * the round's mean.
 */
inline std::vector<TimingRow> bench_overhead(const RunConfig& base, const std::vector<BenchPoint>& grid,
                                             const BenchOptions& options = {}) {
    std::vector<TimingRow> rows;
    for (const auto& point : grid) {
        RunConfig cfg = base;
        cfg.k_way = point.k_way;
        cfg.m_shot = point.m_shot;
        cfg.embed_dim = point.embed_dim;
        cfg.strategy = TrainStrategy::Random;
        TrainingSession random(cfg);
        cfg.strategy = TrainStrategy::GcpHard;
        TrainingSession gcp(cfg);

        for (std::size_t i = 0; i < options.warmup; ++i) {
            random.step();
            gcp.step();
        }
        struct Acc {
            std::vector<double> iter, sample, update;
        } acc_random, acc_gcp;
        auto run_round = [&](TrainingSession& s, Acc& acc) {
            double it = 0.0, sm = 0.0, up = 0.0;
            for (std::size_t i = 0; i < options.iterations_per_round; ++i) {
                IterationTiming t;
                s.step(&t);
                it += t.iteration_ms;
                sm += t.sample_ms;
                up += t.update_ms;
            }
            const auto n = static_cast<double>(options.iterations_per_round);
            acc.iter.push_back(it / n);
            acc.sample.push_back(sm / n);
            acc.update.push_back(up / n);
        };
        for (std::size_t r = 0; r < options.rounds; ++r) {
            if (r % 2 == 0) {
                run_round(random, acc_random);
                run_round(gcp, acc_gcp);
            } else {
                run_round(gcp, acc_gcp);
                run_round(random, acc_random);
            }
        }
        auto lowest = [](const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); };
        TimingRow row;
        row.point = point;
        row.random_ms = lowest(acc_random.iter);
        row.gcp_ms = lowest(acc_gcp.iter);
        row.random_sample_ms = lowest(acc_random.sample);
        row.gcp_sample_ms = lowest(acc_gcp.sample);
        row.gcp_update_ms = lowest(acc_gcp.update);
        row.factor = (row.random_ms - row.random_sample_ms + row.gcp_sample_ms + row.gcp_update_ms) / row.random_ms;
        row.raw_factor = row.gcp_ms / row.random_ms;
        rows.push_back(row);
    }
    return rows;
}

inline void write_bench_csv(std::ostream& out, const std::vector<TimingRow>& rows) {
    out << "k_way,m_shot,embed_dim,random_ms,gcp_ms,random_sample_ms,gcp_sample_ms,gcp_update_ms,factor,raw_factor\n";
    for (const auto& r : rows)
        out << r.point.k_way << ',' << r.point.m_shot << ',' << r.point.embed_dim << ',' << format_fixed(r.random_ms, 6)
            << ',' << format_fixed(r.gcp_ms, 6) << ',' << format_fixed(r.random_sample_ms, 6) << ','
            << format_fixed(r.gcp_sample_ms, 6) << ',' << format_fixed(r.gcp_update_ms, 6) << ','
            << format_fixed(r.factor, 4) << ',' << format_fixed(r.raw_factor, 4) << '\n';
}

// ---------------------------------------------------------------------------
// strategy comparison

struct SeedResult {
    TrainStrategy strategy = TrainStrategy::Random;
    std::uint64_t seed = 0;
    double final_accuracy = 0.0;
    StructureRecovery recovery;
};

struct StrategySummary {
    TrainStrategy strategy = TrainStrategy::Random;
    double mean_accuracy = 0.0;
    double ci95 = 0.0;
    double mean_spearman_same_supercluster = 0.0;
    double mean_spearman_negative_distance = 0.0;
    PairedTTest vs_random;  // paired over seeds; defined when random was run
};

struct Comparison {
    std::vector<SeedResult> per_seed;
    std::vector<StrategySummary> summary;

    std::vector<double> accuracies(TrainStrategy s) const {
        std::vector<double> out;
        for (const auto& r : per_seed)
            if (r.strategy == s) out.push_back(r.final_accuracy);
        return out;
    }
    const StrategySummary& of(TrainStrategy s) const {
        for (const auto& r : summary)
            if (r.strategy == s) return r;
        throw std::out_of_range("strategy not part of the comparison");
    }
};

/**
 * Runs every strategy on every seed (paired: one seed fixes the dataset,
 * split, initial weights and evaluation episodes for all strategies).
 * Runs are distributed over `jobs` threads; results do not depend on it.
 */
inline Comparison compare_strategies(const RunConfig& base, const std::vector<TrainStrategy>& strategies,
                                     const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir = {},
                                     unsigned jobs = std::max(1u, std::thread::hardware_concurrency())) {
    if (seeds.size() < 2) throw std::invalid_argument("compare_strategies needs at least 2 seeds");
    if (strategies.empty()) throw std::invalid_argument("compare_strategies needs at least one strategy");
    Comparison cmp;
    for (auto s : strategies)
        for (auto seed : seeds) cmp.per_seed.push_back({s, seed, 0.0, {}});

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (auto i = next.fetch_add(1); i < cmp.per_seed.size(); i = next.fetch_add(1)) {
            try {
                auto& slot = cmp.per_seed[i];
                RunConfig cfg = base;
                cfg.strategy = slot.strategy;
                cfg.seed = slot.seed;
                const auto dir = out_dir.empty() ? out_dir
                                                 : out_dir / std::string(to_string(slot.strategy)) /
                                                       ("seed_" + std::to_string(slot.seed));
                const auto run = run_training(cfg, dir);
                slot.final_accuracy = run.final_accuracy;
                slot.recovery = run.recovery;
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (unsigned t = 1; t < jobs; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);

    const bool have_random = std::find(strategies.begin(), strategies.end(), TrainStrategy::Random) != strategies.end();
    for (auto s : strategies) {
        StrategySummary sum;
        sum.strategy = s;
        const auto acc = cmp.accuracies(s);
        sum.mean_accuracy = mean(acc);
        sum.ci95 = ci95(acc);
        std::vector<double> same, dist;
        for (const auto& r : cmp.per_seed)
            if (r.strategy == s) {
                same.push_back(r.recovery.vs_same_supercluster);
                dist.push_back(r.recovery.vs_negative_distance);
            }
        sum.mean_spearman_same_supercluster = mean(same);
        sum.mean_spearman_negative_distance = mean(dist);
        if (have_random) sum.vs_random = paired_t_test(acc, cmp.accuracies(TrainStrategy::Random));
        cmp.summary.push_back(sum);
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        auto per_seed = detail::open_output(out_dir / "per_seed.csv");
        per_seed << "strategy,seed,final_accuracy,spearman_same_supercluster,spearman_negative_distance\n";
        for (const auto& r : cmp.per_seed)
            per_seed << to_string(r.strategy) << ',' << r.seed << ',' << format_fixed(r.final_accuracy, 6) << ','
                     << format_fixed(r.recovery.vs_same_supercluster, 6) << ','
                     << format_fixed(r.recovery.vs_negative_distance, 6) << '\n';
        auto summary = detail::open_output(out_dir / "summary.csv");
        summary << "strategy,mean_accuracy,ci95,mean_diff_vs_random,p_value_vs_random,spearman_same_supercluster,"
                   "spearman_negative_distance\n";
        for (const auto& s : cmp.summary)
            summary << to_string(s.strategy) << ',' << format_fixed(s.mean_accuracy, 6) << ','
                    << format_fixed(s.ci95, 6) << ',' << format_fixed(s.vs_random.mean_difference, 6) << ','
                    << format_fixed(s.vs_random.p_value_greater, 6) << ','
                    << format_fixed(s.mean_spearman_same_supercluster, 6) << ','
                    << format_fixed(s.mean_spearman_negative_distance, 6) << '\n';
    }
    return cmp;
}

}  // namespace adatask
