#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "test_support.hpp"

using namespace adatask;
namespace t = adatask::testing;

TEST(CategorySet, RejectsDuplicatesAndSingletons) {
    EXPECT_THROW(CategorySet({1}), std::invalid_argument);
    EXPECT_THROW(CategorySet({1, 2, 1}), std::invalid_argument);
    const CategorySet s({4, 1, 3});
    EXPECT_TRUE(s.same_set(CategorySet({1, 3, 4})));
    EXPECT_TRUE(s.contains(3));
    EXPECT_FALSE(s.contains(2));
}

TEST(BuildEpisode, MinimalEpisode) {
    const auto data = t::random_dataset(3, 5, 2, 1);
    Rng rng(2);
    const auto ep = build_episode(data, CategorySet({2, 0}), 1, 1, rng);
    ASSERT_EQ(ep.support.size(), 2u);
    ASSERT_EQ(ep.query.size(), 2u);
    for (std::size_t w = 0; w < 2; ++w) {
        EXPECT_EQ(ep.support[w].way, w);
        EXPECT_EQ(ep.query[w].way, w);
        EXPECT_NE(ep.support[w].pool_index, ep.query[w].pool_index);
        EXPECT_EQ(ep.support[w].point->label, ep.categories[w]);
    }
}

TEST(BuildEpisode, ExhaustingThePoolCoversIt) {
    const auto data = t::random_dataset(4, 6, 2, 1);
    Rng rng(3);
    const auto ep = build_episode(data, CategorySet({0, 1, 3}), 2, 4, rng);
    for (std::size_t w = 0; w < 3; ++w) {
        std::set<std::size_t> seen;
        for (std::size_t i = 0; i < 2; ++i) seen.insert(ep.support[w * 2 + i].pool_index);
        for (std::size_t i = 0; i < 4; ++i) seen.insert(ep.query[w * 4 + i].pool_index);
        EXPECT_EQ(seen.size(), 6u);
    }
    EXPECT_THROW(build_episode(data, CategorySet({0, 1}), 3, 4, rng), std::invalid_argument);
    EXPECT_THROW(build_episode(data, CategorySet({0, 4}), 1, 1, rng), std::out_of_range);
}

TEST(BuildEpisode, HistogramAndDisjointness) {
    const auto data = t::random_dataset(10, 30, 3, 4);
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto cats = sample_classes_uniform(10, 5, rng);
        const auto ep = build_episode(data, cats, 3, 7, rng);
        std::vector<int> support_hist(5, 0), query_hist(5, 0);
        for (const auto& p : ep.support) ++support_hist[p.way];
        for (const auto& p : ep.query) ++query_hist[p.way];
        for (int w = 0; w < 5; ++w) {
            EXPECT_EQ(support_hist[w], 3);
            EXPECT_EQ(query_hist[w], 7);
        }
        std::set<const LabeledPoint*> used;
        for (const auto& p : ep.support) used.insert(p.point);
        for (const auto& p : ep.query) EXPECT_FALSE(used.count(p.point));
    }
}

TEST(BuildEpisode, DeterministicUnderSeed) {
    const auto data = t::random_dataset(6, 20, 2, 6);
    Rng a(77), b(77);
    const auto e1 = build_episode(data, CategorySet({5, 2, 0}), 4, 6, a);
    const auto e2 = build_episode(data, CategorySet({5, 2, 0}), 4, 6, b);
    for (std::size_t i = 0; i < e1.query.size(); ++i) EXPECT_EQ(e1.query[i].point, e2.query[i].point);
    for (std::size_t i = 0; i < e1.support.size(); ++i) EXPECT_EQ(e1.support[i].point, e2.support[i].point);
}

TEST(MetaSplit, Proportions) {
    const auto data = t::random_dataset(25, 4, 2, 1);
    const auto [train, test] = meta_split(data, 0.8);
    EXPECT_EQ(train.num_classes(), 20u);
    EXPECT_EQ(test.num_classes(), 5u);
    const auto tl = train.global_labels();
    for (auto l : test.global_labels()) EXPECT_EQ(std::count(tl.begin(), tl.end(), l), 0);
    EXPECT_EQ(test.pool(0).size(), 4u);
    EXPECT_THROW(meta_split(data, 1.0), std::invalid_argument);
    EXPECT_THROW(meta_split(data, 0.9, 5), std::invalid_argument);
}

TEST(MetaSplit, ThreeWayByComposition) {
    const auto data = t::random_dataset(100, 2, 2, 1);
    const auto [train, rest] = meta_split(data, 0.64);
    const auto [val, test] = meta_split(rest, 16.0 / 36.0);
    EXPECT_EQ(train.num_classes(), 64u);
    EXPECT_EQ(val.num_classes(), 16u);
    EXPECT_EQ(test.num_classes(), 20u);
    EXPECT_EQ(test.global_label(0), 80u);
}

TEST(DatasetCsv, RoundTrip) {
    const auto data = t::random_dataset(3, 4, 2, 9);
    std::stringstream io;
    save_dataset_csv(io, data);
    const auto back = load_dataset_csv(io);
    ASSERT_EQ(back.num_classes(), 3u);
    ASSERT_EQ(back.pool_size(), 4u);
    for (ClassId c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(back.pool(c)[i].features, data.pool(c)[i].features);
    std::istringstream head(io.str());
    std::string first;
    std::getline(head, first);
    EXPECT_EQ(first, "label,f0,f1");
}

TEST(DatasetCsv, RejectsRaggedPools) {
    std::istringstream in("label,f0\n0,1.0\n0,2.0\n1,3.0\n");
    EXPECT_THROW(load_dataset_csv(in), std::invalid_argument);
}

TEST(Predictions, Validation) {
    const auto data = t::random_dataset(2, 4, 2, 9);
    Rng rng(1);
    const auto ep = build_episode(data, CategorySet({0, 1}), 1, 1, rng);
    EXPECT_NO_THROW(validate_predictions(t::batch_from_rows({{0.5, 0.5}, {0.1, 0.9}}), ep));
    EXPECT_THROW(validate_predictions(t::batch_from_rows({{-0.1, 1.1}, {0.1, 0.9}}), ep), std::invalid_argument);
}
