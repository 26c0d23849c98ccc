// adatask command line: train, verify-prop1, bench, compare, gen-data.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "adatask/adatask.hpp"

namespace fs = std::filesystem;
using namespace adatask;

namespace {

std::string hyphenate(std::string s) {
    for (auto& c : s)
        if (c == '_') c = '-';
    return s;
}

// One string-valued flag per config key; values are applied after the
// --config file so flags win.
struct ConfigFlags {
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::string config_file;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "flat key=value file")->check(CLI::ExistingFile);
        for (const auto& key : config_key_names())
            options[key] = cmd->add_option("--" + hyphenate(key), values[key], "config key " + key);
    }

    RunConfig resolve(RunConfig cfg) const {
        if (!config_file.empty()) {
            std::ifstream in(config_file);
            if (!in) throw std::runtime_error("cannot read " + config_file);
            apply_settings(cfg, parse_config_text(in));
        }
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) apply_setting(cfg, key, values.at(key));
        cfg.validate();
        return cfg;
    }
};

std::ofstream open_file(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!trim(item).empty()) out.emplace_back(trim(item));
    return out;
}

// "k:m:e" triples, comma separated.
std::vector<BenchPoint> parse_grid(const std::string& s) {
    std::vector<BenchPoint> grid;
    for (const auto& item : split_list(s)) {
        std::vector<std::size_t> parts;
        std::stringstream in(item);
        std::string p;
        while (std::getline(in, p, ':')) parts.push_back(static_cast<std::size_t>(parse_unsigned(p)));
        if (parts.size() != 3) throw std::invalid_argument("grid entry '" + item + "' is not k:m:e");
        grid.push_back({parts[0], parts[1], parts[2]});
    }
    if (grid.empty()) throw std::invalid_argument("empty bench grid");
    return grid;
}

int run_train(const ConfigFlags& flags, const std::string& out) {
    const auto cfg = flags.resolve(RunConfig{});
    const auto res = run_training(cfg, out);
    std::printf("strategy=%s seed=%llu final_accuracy=%.4f ci95=%.4f spearman_same=%.3f spearman_dist=%.3f out=%s\n",
                std::string(to_string(cfg.strategy)).c_str(), static_cast<unsigned long long>(cfg.seed),
                res.final_accuracy, res.final_accuracy_ci95, res.recovery.vs_same_supercluster,
                res.recovery.vs_negative_distance, out.c_str());
    return 0;
}

int run_verify(std::size_t n, std::size_t k, std::size_t matrices, std::uint64_t seed, std::uint64_t draws,
               const std::string& out) {
    Rng rng(seed);
    const auto rows = verify_prop1(n, k, matrices, rng, draws);
    fs::create_directories(out);
    auto csv = open_file(fs::path(out) / "prop1.csv");
    write_prop1_csv(csv, rows);
    const auto ce = counterexample_matrix();
    auto cp = open_file(fs::path(out) / "counterexample_cp.csv");
    write_distribution_csv(cp, exact_cp_distribution(ce, 3));
    auto gcp = open_file(fs::path(out) / "counterexample_gcp.csv");
    write_distribution_csv(gcp, exact_gcp_distribution(ce, 3));
    write_prop1_csv(std::cout, rows);
    return 0;
}

int run_bench(const ConfigFlags& flags, const std::string& grid, const BenchOptions& opts, const std::string& out) {
    const auto cfg = flags.resolve(default_bench_config());
    const auto rows = bench_overhead(cfg, grid.empty() ? default_bench_grid() : parse_grid(grid), opts);
    fs::create_directories(out);
    auto csv = open_file(fs::path(out) / "timing.csv");
    write_bench_csv(csv, rows);
    write_bench_csv(std::cout, rows);
    return 0;
}

int run_compare(const ConfigFlags& flags, const std::string& strategies, std::size_t seeds, std::uint64_t first_seed,
                unsigned jobs, const std::string& out) {
    const auto cfg = flags.resolve(RunConfig{});
    std::vector<TrainStrategy> list;
    for (const auto& s : split_list(strategies)) list.push_back(parse_train_strategy(s));
    std::vector<std::uint64_t> seed_list(seeds);
    for (std::size_t i = 0; i < seeds; ++i) seed_list[i] = first_seed + i;
    const auto cmp = compare_strategies(cfg, list, seed_list, out, jobs);
    std::printf("%-14s %9s %8s %11s %9s %9s\n", "strategy", "accuracy", "ci95", "vs_random", "p_value", "spearman");
    for (const auto& s : cmp.summary)
        std::printf("%-14s %9.4f %8.4f %+11.4f %9.4f %9.3f\n", std::string(to_string(s.strategy)).c_str(),
                    s.mean_accuracy, s.ci95, s.vs_random.mean_difference, s.vs_random.p_value_greater,
                    s.mean_spearman_same_supercluster);
    return 0;
}

int run_gen_data(const ConfigFlags& flags, const std::string& out) {
    const auto spec = flags.resolve(RunConfig{}).data_spec();
    fs::create_directories(out);
    auto data = open_file(fs::path(out) / "dataset.csv");
    save_dataset_csv(data, generate(spec));
    auto groups = open_file(fs::path(out) / "superclusters.csv");
    write_supercluster_csv(groups, spec);
    std::printf("wrote %zu classes x %zu points (d=%zu) to %s\n", spec.num_classes, spec.points_per_class, spec.dim,
                out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive task sampling for episodic few-shot training"};
    app.require_subcommand(1);
    std::string out = "out";

    auto* train = app.add_subcommand("train", "run one training session");
    ConfigFlags train_flags;
    train_flags.attach(train);
    train->add_option("--out", out, "output directory");

    auto* verify = app.add_subcommand("verify-prop1", "compare the greedy and exact class-pair laws");
    std::size_t v_n = 6, v_k = 3, v_matrices = 10;
    std::uint64_t v_seed = 1, v_draws = 20000;
    verify->add_option("--num-classes", v_n, "classes per random matrix (<= 8)");
    verify->add_option("--k", v_k, "set size (<= 5)");
    verify->add_option("--matrices", v_matrices, "random matrices per row group");
    verify->add_option("--seed", v_seed, "rng seed");
    verify->add_option("--draws", v_draws, "sampler draws per chi-square test (0 skips)");
    verify->add_option("--out", out, "output directory");

    auto* bench = app.add_subcommand("bench", "time random vs gcp-hard iterations");
    ConfigFlags bench_flags;
    bench_flags.attach(bench);
    std::string grid;
    BenchOptions opts;
    bench->add_option("--grid", grid, "comma separated k:m:e points (default grid if empty)");
    bench->add_option("--warmup", opts.warmup, "untimed iterations per session");
    bench->add_option("--rounds", opts.rounds, "alternating timing rounds");
    bench->add_option("--round-iterations", opts.iterations_per_round, "iterations per round");
    bench->add_option("--out", out, "output directory");

    auto* compare = app.add_subcommand("compare", "paired multi-seed strategy comparison");
    ConfigFlags compare_flags;
    compare_flags.attach(compare);
    std::string strategies = "random,c-hard,gcp-hard,gcp-easy,gcp-uncertain";
    std::size_t n_seeds = 20;
    std::uint64_t first_seed = 1;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    compare->add_option("--strategies", strategies, "comma separated strategy names");
    compare->add_option("--seeds", n_seeds, "number of paired seeds")->check(CLI::Range(2, 100000));
    compare->add_option("--first-seed", first_seed, "seeds run first-seed .. first-seed+seeds-1");
    compare->add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1, 1024));
    compare->add_option("--out", out, "output directory");

    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset and its supercluster map");
    ConfigFlags gen_flags;
    gen_flags.attach(gen);
    gen->add_option("--out", out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.get_exit_code();
    }

    try {
        if (*train) return run_train(train_flags, out);
        if (*verify) return run_verify(v_n, v_k, v_matrices, v_seed, v_draws, out);
        if (*bench) return run_bench(bench_flags, grid, opts, out);
        if (*compare) return run_compare(compare_flags, strategies, n_seeds, first_seed, jobs, out);
        if (*gen) return run_gen_data(gen_flags, out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
