// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "test_support.hpp"

using namespace adatask;
namespace fs = std::filesystem;
namespace t = adatask::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome greedy_vs_exact() {
    Rng rng(2024);
    double worst_equal = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto n = 3 + static_cast<std::size_t>(rng.uniform_index(6));  // 3..8
        const auto k = 2 + static_cast<std::size_t>(rng.uniform_index(std::min<std::size_t>(n, 5) - 1));
        const auto m = random_lognormal_matrix(n, 1.0, rng);
        worst_equal = std::max(worst_equal, distribution_distance(exact_gcp_distribution(m, 2), exact_cp_distribution(m, 2)));
        const PotentialMatrix flat(n);
        worst_equal = std::max(worst_equal, distribution_distance(exact_gcp_distribution(flat, k), exact_cp_distribution(flat, k)));
    }
    const auto ce = counterexample_matrix();
    const auto gcp = exact_gcp_distribution(ce, 3);
    const auto cp = exact_cp_distribution(ce, 3);
    const double tv = distribution_distance(gcp, cp);
    const auto oracle_g = t::brute_force_gcp(ce, 3).at({0, 1, 2});
    const auto oracle_c = t::brute_force_cp(ce, 3).at({0, 1, 2});
    const double pg = gcp.probability({0, 1, 2}), pc = cp.probability({0, 1, 2});
    const bool match = std::abs(pg - oracle_g) < 1e-9 && std::abs(pc - oracle_c) < 1e-9 &&
                       std::abs(pg - 121.0 / 420.0) < 1e-9 && std::abs(pc - 6.0 / 21.0) < 1e-9;
    return {worst_equal <= 1e-12 && tv > 1e-3 && match,
            fmt("max TV on k=2/constant = %.2e, counterexample TV = %.5f, P_gcp = %.8f, P_cp = %.8f", worst_equal, tv,
                pg, pc)};
}

Outcome sampler_consistency() {
    Rng rng(7);
    double min_p = 1.0;
    for (int i = 0; i < 10; ++i) {
        const auto m = random_lognormal_matrix(6, 1.0, rng);
        const auto emp =
            empirical_distribution([&](Rng& r) { return sample_task_gcp(m, 3, r); }, 6, 3, 100000, rng);
        min_p = std::min(min_p, chi_square(emp, exact_gcp_distribution(m, 3)).p_value);
    }
    return {min_p > 0.001, fmt("smallest chi-square p over 10 matrices = %.4f", min_p)};
}

Outcome update_rules() {
    std::vector<std::string> failed;
    auto check = [&](bool ok, const char* what) {
        if (!ok) failed.emplace_back(what);
    };
    const auto two = t::random_dataset(2, 4, 2, 1);
    Rng rng(1);
    const auto ep = build_episode(two, CategorySet({0, 1}), 1, 2, rng);
    const auto conf = pair_confusion(t::batch_from_rows({{0.8, 0.2}, {0.6, 0.4}, {0.3, 0.7}, {0.5, 0.5}}), ep);
    check(std::abs(conf[0].value - 0.7) < 1e-9, "pair confusion 0.7");
    check(pair_confusion(t::perfect_batch(ep), ep)[0].value == 0.0, "perfect confusion");
    check(std::abs(pair_confusion(t::uniform_batch(ep), ep)[0].value - 1.0) < 1e-9, "uniform confusion");

    PotentialMatrix m(2);
    const std::vector<PairConfusion> u07{{0, 1, 0.7}};
    m.apply_update(u07, 1.0, 0.5, Strategy::Hard);
    check(std::abs(m.potential(0, 1) - std::exp(0.7)) < 1e-9, "update e^0.7");
    const std::vector<PairConfusion> u0{{0, 1, 0.0}};
    const double before = m.log_potential(0, 1);
    m.apply_update(u0, 1.0, 0.5, Strategy::Hard);
    check(std::abs(m.log_potential(0, 1) - 0.5 * before) < 1e-12, "pure discount");

    const auto ep1 = build_episode(two, CategorySet({0, 1}), 1, 1, rng);
    const auto cw = class_weight_update({{1.0, 1.0}}, ep1, t::batch_from_rows({{0.6, 0.4}, {0.1, 0.9}}), 1.0, 0.5);
    check(std::abs(cw.weights[0] - std::exp(0.25)) < 1e-9, "class score 0.25");
    const auto iw = instance_weight_update({{1.0, 1.0}}, std::vector<double>{0.2, 1.0}, 1.0, 1.0);
    check(std::abs(iw.weights[0] / iw.weights[1] - std::exp(0.8)) < 1e-9, "instance factor e^0.8");

    Rng ur(3);
    bool algebra = true;
    for (int i = 0; i < 10000; ++i) {
        const double u = ur.uniform();
        const double h = strategy_score(Strategy::Hard, u), e = strategy_score(Strategy::Easy, u);
        algebra = algebra && std::abs(h + e - 1.0) < 1e-12 &&
                  std::abs(strategy_score(Strategy::Uncertain, u) - h * e) < 1e-12;
    }
    check(algebra, "strategy algebra");
    std::string detail = failed.empty() ? "all hand examples and 10^4 algebra checks hold" : "failed:";
    for (const auto& f : failed) detail += " " + f + ";";
    return {failed.empty(), detail};
}

Outcome gradient_check() {
    Rng rng(11);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto data = t::random_dataset(6, 4, 4, 500 + static_cast<std::uint64_t>(trial));
        const auto ep = build_episode(data, sample_classes_uniform(6, 3, rng), 2, 2, rng);
        const auto emb = LinearEmbedding::random(3, 4, 0.1, rng);
        worst = std::max(worst,
                         t::relative_error(loss_and_gradient(emb.weight, ep).gradient, t::numeric_gradient(emb.weight, ep)));
    }
    return {worst < 1e-4, fmt("worst relative error over 100 episodes = %.2e", worst)};
}

Outcome determinism(const fs::path& out) {
    const RunConfig cfg;
    run_training(cfg, out / "det_a");
    run_training(cfg, out / "det_b");
    const auto a = slurp(out / "det_a" / "metrics.csv");
    const auto b = slurp(out / "det_b" / "metrics.csv");
    return {!a.empty() && a == b, fmt("metrics.csv sizes %.0f and %.0f bytes", static_cast<double>(a.size()),
                                      static_cast<double>(b.size())) + (a == b ? ", identical" : ", differ")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::string out = (fs::temp_directory_path() / "adatask_acceptance").string();
    std::size_t seeds = 20;
    app.add_option("--out", out, "scratch directory for run outputs");
    app.add_option("--seeds", seeds, "paired seeds for the strategy comparison")->check(CLI::Range(2, 1000));
    CLI11_PARSE(app, argc, argv);
    fs::remove_all(out);
    fs::create_directories(out);

    bool all = true;
    auto report = [&](const std::string& name, double limit_s, const std::function<Outcome()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = limit_s <= 0.0 || secs < limit_s;
        const bool pass = o.pass && in_time;
        all = all && pass;
        std::printf("[%s] %s: %s (%.1f s%s)\n", pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs,
                    in_time ? "" : fmt(", limit %.0f s", limit_s).c_str());
        std::fflush(stdout);
    };

    report("greedy vs exact class-pair law", 10.0, greedy_vs_exact);
    report("greedy sampler consistency", 30.0, sampler_consistency);
    report("update rules", 0.0, update_rules);
    report("gradient check", 10.0, gradient_check);

    std::optional<Comparison> cmp;
    double compare_secs = 0.0;
    report("end-to-end strategy ordering", 600.0, [&]() -> Outcome {
        std::vector<std::uint64_t> s(seeds);
        std::iota(s.begin(), s.end(), std::uint64_t{1});
        const auto t0 = std::chrono::steady_clock::now();
        cmp = compare_strategies(RunConfig{}, {TrainStrategy::Random, TrainStrategy::GcpHard, TrainStrategy::GcpEasy},
                                 s, fs::path(out) / "compare", 1);
        compare_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto& hard = cmp->of(TrainStrategy::GcpHard);
        const auto& rnd = cmp->of(TrainStrategy::Random);
        const auto& easy = cmp->of(TrainStrategy::GcpEasy);
        const bool ok = hard.mean_accuracy >= rnd.mean_accuracy && hard.mean_accuracy >= easy.mean_accuracy &&
                        hard.vs_random.p_value_greater < 0.05;
        return {ok, fmt("gcp-hard %.4f, random %.4f, gcp-easy %.4f, paired p(hard > random) = %.4f",
                        hard.mean_accuracy, rnd.mean_accuracy, easy.mean_accuracy, hard.vs_random.p_value_greater)};
    });
    report("potential structure recovery", 0.0, [&]() -> Outcome {
        if (!cmp) return {false, "comparison did not run"};
        const auto& hard = cmp->of(TrainStrategy::GcpHard);
        return {hard.mean_spearman_same_supercluster > 0.3 && hard.mean_spearman_negative_distance > 0.3 &&
                    compare_secs < 600.0,
                fmt("gcp-hard mean Spearman vs same-supercluster %.3f, vs -center distance %.3f",
                    hard.mean_spearman_same_supercluster, hard.mean_spearman_negative_distance)};
    });
    report("overhead trends", 0.0, [&]() -> Outcome {
        auto grid = std::vector<BenchPoint>{{5, 5, 16}, {10, 5, 16}, {15, 5, 16}, {20, 5, 16}, {5, 5, 64}};
        const auto rows = bench_overhead(default_bench_config(), grid);
        const auto base = bench_overhead(RunConfig{}, {{5, 5, 16}});
        bool increasing = true;
        for (std::size_t i = 1; i < 4; ++i) increasing = increasing && rows[i].factor > rows[i - 1].factor;
        const bool shrinks = rows[4].factor < rows[0].factor;
        const bool bounded = base[0].factor < 1.5;
        std::string detail = "factor over K=5,10,15,20:";
        for (std::size_t i = 0; i < 4; ++i) detail += fmt(" %.4f", rows[i].factor);
        detail += fmt("; 4x embedding %.4f; default learner at K=5 %.4f", rows[4].factor, base[0].factor);
        std::ofstream csv(fs::path(out) / "timing.csv");
        auto all_rows = rows;
        all_rows.insert(all_rows.end(), base.begin(), base.end());
        write_bench_csv(csv, all_rows);
        return {increasing && shrinks && bounded, detail};
    });
    report("determinism", 0.0, [&] { return determinism(out); });

    std::printf("%s\n", all ? "all acceptance criteria passed" : "some acceptance criteria failed");
    return all ? 0 : 1;
}
