#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_support.hpp"

using namespace adatask;
using adatask::testing::batch_from_rows;

namespace {

// Two classes {A = 0, B = 1}, one support and two query points each.
struct TwoClass : ::testing::Test {
    ClassIndexedDataset data = adatask::testing::random_dataset(2, 4, 3, 7);
    Rng rng{3};
    Episode ep = build_episode(data, CategorySet({0, 1}), 1, 2, rng);
};

}  // namespace

TEST_F(TwoClass, PairConfusionHandExample) {
    // queries of A put 0.2 / 0.4 on B, queries of B put 0.3 / 0.5 on A
    const auto batch = batch_from_rows({{0.8, 0.2}, {0.6, 0.4}, {0.3, 0.7}, {0.5, 0.5}});
    const auto conf = pair_confusion(batch, ep);
    ASSERT_EQ(conf.size(), 1u);
    EXPECT_EQ(conf[0].first, 0u);
    EXPECT_EQ(conf[0].second, 1u);
    EXPECT_NEAR(conf[0].value, 0.7, 1e-12);
}

TEST_F(TwoClass, PairConfusionInvariantToQueryOrder) {
    auto batch = batch_from_rows({{0.8, 0.2}, {0.6, 0.4}, {0.3, 0.7}, {0.5, 0.5}});
    auto shuffled = ep;
    std::swap(shuffled.query[0], shuffled.query[3]);
    batch.probs.row(0).swap(batch.probs.row(3));
    EXPECT_NEAR(pair_confusion(batch, shuffled)[0].value, 0.7, 1e-12);
}

TEST_F(TwoClass, PairConfusionRejectsMalformedBatches) {
    EXPECT_THROW(pair_confusion(batch_from_rows({{0.5, 0.5}, {0.5, 0.5}}), ep), std::invalid_argument);
    EXPECT_THROW(pair_confusion(batch_from_rows({{1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}}), ep),
                 std::invalid_argument);
    EXPECT_THROW(pair_confusion(batch_from_rows({{0.9, 0.2}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}), ep),
                 std::invalid_argument);
}

TEST(PairConfusion, PerfectAndUniformClassifiers) {
    const auto data = adatask::testing::random_dataset(6, 10, 2, 1);
    Rng rng(5);
    const auto ep = build_episode(data, CategorySet({4, 1, 3, 0}), 2, 3, rng);
    const auto perfect = pair_confusion(adatask::testing::perfect_batch(ep), ep);
    const auto uniform = pair_confusion(adatask::testing::uniform_batch(ep), ep);
    ASSERT_EQ(perfect.size(), 6u);
    for (const auto& p : perfect) EXPECT_EQ(p.value, 0.0);
    for (const auto& p : uniform) EXPECT_NEAR(p.value, 0.5, 1e-12);
    // reported with class ids in way order
    EXPECT_EQ(perfect.front().first, 4u);
    EXPECT_EQ(perfect.front().second, 1u);
}

TEST(PairConfusion, OracleLearnerReproducesHandExample) {
    // class-level means of the hand example: A queries give B 0.3, B queries give A 0.4
    Eigen::MatrixXd table(2, 2);
    table << 0.7, 0.3, 0.4, 0.6;
    const auto data = adatask::testing::random_dataset(2, 4, 3, 7);
    Rng rng(9);
    const auto ep = build_episode(data, CategorySet({0, 1}), 1, 2, rng);
    const auto conf = pair_confusion(oracle_forward({table}, ep), ep);
    EXPECT_NEAR(conf[0].value, 0.7, 1e-12);

    PotentialMatrix m(2);
    m.apply_update(conf, 1.0, 0.5, Strategy::Hard);
    EXPECT_NEAR(m.potential(0, 1), std::exp(0.7), 1e-9);
}

TEST(StrategyScore, Values) {
    EXPECT_DOUBLE_EQ(strategy_score(Strategy::Hard, 0.7), 0.7);
    EXPECT_DOUBLE_EQ(strategy_score(Strategy::Easy, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(strategy_score(Strategy::Uncertain, 0.5), 0.25);
    EXPECT_DOUBLE_EQ(strategy_score(Strategy::Uncertain, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(strategy_score(Strategy::Uncertain, 1.0), 0.0);
    // above 1: Hard keeps the raw value, the others clamp first
    EXPECT_DOUBLE_EQ(strategy_score(Strategy::Hard, 1.6), 1.6);
    EXPECT_DOUBLE_EQ(strategy_score(Strategy::Easy, 1.6), 0.0);
    EXPECT_DOUBLE_EQ(strategy_score(Strategy::Uncertain, 1.6), 0.0);
}

TEST(StrategyScore, AlgebraOnRandomInputs) {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        const double h = strategy_score(Strategy::Hard, u), e = strategy_score(Strategy::Easy, u);
        EXPECT_NEAR(h + e, 1.0, 1e-12);
        EXPECT_NEAR(strategy_score(Strategy::Uncertain, u), h * e, 1e-12);
    }
}

TEST(ApplyUpdate, HandExample) {
    PotentialMatrix m(3);
    const std::vector<PairConfusion> conf{{0, 2, 0.7}};
    const auto out = apply_update(m, conf, 1.0, 0.5, Strategy::Hard);
    EXPECT_NEAR(out.potential(0, 2), 2.0137527074704766, 1e-9);
    EXPECT_EQ(out.potential(2, 0), out.potential(0, 2));
    EXPECT_EQ(out.log_potential(0, 1), 0.0);  // untouched pair
    EXPECT_EQ(m.log_potential(0, 2), 0.0);    // functional form copies
}

TEST(ApplyUpdate, ZeroConfusionIsPureDiscount) {
    PotentialMatrix m(3);
    m.set_log_potential(0, 1, 1.2);
    const std::vector<PairConfusion> conf{{0, 1, 0.0}};
    m.apply_update(conf, 1.0, 0.5, Strategy::Hard);
    EXPECT_NEAR(m.log_potential(0, 1), 0.6, 1e-12);
}

TEST(ApplyUpdate, UncertainScores) {
    PotentialMatrix m(2);
    const std::vector<PairConfusion> half{{0, 1, 0.5}};
    m.apply_update(half, 2.0, 0.0, Strategy::Uncertain);
    EXPECT_NEAR(m.log_potential(0, 1), 0.5, 1e-12);
}

TEST(ApplyUpdate, Errors) {
    PotentialMatrix m(3);
    const std::vector<PairConfusion> bad{{0, 3, 0.5}};
    EXPECT_THROW(m.apply_update(bad, 1.0, 0.5, Strategy::Hard), std::out_of_range);
    const std::vector<PairConfusion> ok{{0, 1, 0.5}};
    EXPECT_THROW(m.apply_update(ok, 0.0, 0.5, Strategy::Hard), std::invalid_argument);
    EXPECT_THROW(m.apply_update(ok, 1.0, 1.5, Strategy::Hard), std::invalid_argument);
    const std::vector<PairConfusion> full{{0, 1, 1.0}};
    m.apply_update(full, 1e308, 1.0, Strategy::Hard);
    const auto before = m.log_potential(0, 1);
    EXPECT_THROW(m.apply_update(full, 1e308, 1.0, Strategy::Hard), std::domain_error);
    EXPECT_EQ(m.log_potential(0, 1), before);
}

TEST(ApplyUpdate, SymmetryAndBoundOverManyUpdates) {
    PotentialMatrix m(6);
    Rng rng(21);
    const double bound = 2.0 * 1.0 / (1.0 - 0.5);
    for (int t = 0; t < 1000000; ++t) {
        const auto i = static_cast<ClassId>(rng.uniform_index(6));
        auto j = static_cast<ClassId>(rng.uniform_index(5));
        if (j >= i) ++j;
        const std::vector<PairConfusion> conf{{i, j, 2.0 * rng.uniform()}};
        m.apply_update(conf, 1.0, 0.5, Strategy::Hard);
    }
    for (ClassId i = 0; i < 6; ++i)
        for (ClassId j = 0; j < 6; ++j) {
            if (i == j) continue;
            EXPECT_EQ(m.log_potential(i, j), m.log_potential(j, i));
            EXPECT_TRUE(std::isfinite(m.log_potential(i, j)));
            EXPECT_LE(std::abs(m.log_potential(i, j)), bound);
        }
}

TEST(ApplyUpdate, DiscountConvergesToOne) {
    PotentialMatrix m(2);
    m.set_log_potential(0, 1, 3.0);
    const std::vector<PairConfusion> zero{{0, 1, 0.0}};
    for (int t = 1; t <= 40; ++t) {
        m.apply_update(zero, 1.0, 0.5, Strategy::Hard);
        EXPECT_NEAR(m.log_potential(0, 1), 3.0 * std::pow(0.5, t), 1e-12);
    }
    EXPECT_NEAR(m.potential(0, 1), 1.0, 1e-9);
}

TEST(PotentialCache, TracksLogValuesAcrossLargeShifts) {
    PotentialMatrix m(4);
    m.set_log_potential(0, 1, 500.0);
    m.set_log_potential(2, 3, -300.0);
    for (ClassId i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (ClassId j = 0; j < 4; ++j) {
            const double expect = i == j ? 0.0 : std::exp(m.log_potential(i, j) - m.shift());
            EXPECT_NEAR(m.scaled(i, j), expect, 1e-12 * std::max(1.0, expect));
            sum += m.scaled(i, j);
        }
        EXPECT_NEAR(m.scaled_row_sum(i), sum, 1e-9 * sum);
    }
}

TEST(Snapshot, NormalizesToMaximum) {
    PotentialMatrix flat(3);
    for (const auto& row : snapshot(flat))
        for (double v : row) EXPECT_TRUE(v == 0.0 || v == 1.0);
    PotentialMatrix m(3);
    m.set_potential(0, 2, 4.0);
    const auto s = snapshot(m);
    EXPECT_DOUBLE_EQ(s[0][2], 1.0);
    EXPECT_DOUBLE_EQ(s[2][0], 1.0);
    EXPECT_NEAR(s[0][1], 0.25, 1e-15);
    EXPECT_EQ(s[1][1], 0.0);
}

TEST(Snapshot, CsvLayout) {
    PotentialMatrix m(3);
    m.set_potential(0, 1, 2.0);
    std::ostringstream out;
    const std::vector<ClassId> ids{7, 8, 9};
    write_snapshot_csv(out, m, std::span<const ClassId>(ids));
    EXPECT_EQ(out.str(),
              "7,8,9\n"
              "0.000000,1.000000,0.500000\n"
              "1.000000,0.000000,0.500000\n"
              "0.500000,0.500000,0.000000\n");
}
