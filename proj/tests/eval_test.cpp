#include "metaemb/eval.hpp"
#include "metaemb/report.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace metaemb;
using testutil::view_of;

TEST(PredictSimilarities, Cosines) {
    const auto emb = view_of({{1, 0}, {0, 1}, {-1, 0}, {2, 0}, {0, 0}});
    const std::vector<StsRecord> recs{{0, 3, 0}, {0, 1, 0}, {0, 2, 0}, {0, 4, 0}};
    const auto y = predict_similarities(emb, recs);
    EXPECT_DOUBLE_EQ(y[0], 1.0);
    EXPECT_DOUBLE_EQ(y[1], 0.0);
    EXPECT_DOUBLE_EQ(y[2], -1.0);
    EXPECT_EQ(y[3], 0.0);
    EXPECT_THROW(predict_similarities(emb, std::vector<StsRecord>{{0, 5, 1.0}}), InvalidInput);
}

TEST(Pearson, Examples) {
    EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0, 1e-15);
    EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}), -1.0, 1e-15);
    EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}), 0.8, 1e-15);
}

TEST(Pearson, Errors) {
    EXPECT_THROW(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DegenerateInput);
    EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), InvalidInput);
    EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), InvalidInput);
    EXPECT_THROW(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{4, 4, 4}), DegenerateInput);
}

TEST(Spearman, Examples) {
    const std::vector<double> x{0.1, 0.5, 0.9, 1.3, 2.0};
    std::vector<double> y;
    for (double v : x) y.push_back(std::exp(3 * v));
    EXPECT_NEAR(spearman(x, y), 1.0, 1e-15);
    for (double& v : y) v = -v;
    EXPECT_NEAR(spearman(x, y), -1.0, 1e-15);
    EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 1, 2}), std::sqrt(3.0) / 2.0, 1e-12);
    EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 1, 2}), 0.866, 1e-3);
}

TEST(Ranks, TiesAveraged) {
    EXPECT_EQ(average_ranks(std::vector<double>{10, 20, 20, 5, 20}), (std::vector<double>{2, 4, 4, 1, 4}));
}

TEST(Correlation, MatchesBruteForceWithTies) {
    std::mt19937_64 gen(1);
    std::uniform_int_distribution<int> small(0, 6);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + trial % 40;
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = trial % 2 ? small(gen) : nd(gen);
            y[i] = small(gen) + 0.5 * x[i];
        }
        if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
            std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
            continue;
        }
        EXPECT_NEAR(pearson(x, y), oracle::brute_pearson(x, y), 1e-12);
        EXPECT_NEAR(spearman(x, y), oracle::brute_spearman(x, y), 1e-12);
    }
}

TEST(Correlation, TransformInvariance) {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(30), y(30);
        for (auto& v : x) v = nd(gen);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + nd(gen);
        std::vector<double> ex, cube, affine;
        for (double v : x) {
            ex.push_back(std::exp(v));
            cube.push_back(v * v * v);
            affine.push_back(3.5 * v - 2.0);
        }
        EXPECT_EQ(spearman(x, y), spearman(ex, y));
        EXPECT_EQ(spearman(x, y), spearman(cube, y));
        EXPECT_NEAR(pearson(x, y), pearson(affine, y), 1e-12);
        std::vector<double> affine_y;
        for (double v : y) affine_y.push_back(0.25 * v + 7.0);
        EXPECT_NEAR(pearson(x, y), pearson(x, affine_y), 1e-12);
    }
}

namespace {

StsDataset two_subsets() {
    StsDataset ds;
    ds.subsets.push_back({"a", {{0, 1, 1.0}, {0, 2, 2.0}, {1, 2, 3.5}, {2, 3, 0.5}}});
    ds.subsets.push_back({"b", {{3, 4, 1.0}, {0, 4, 4.0}, {1, 3, 2.0}}});
    return ds;
}

}  // namespace

TEST(Evaluate, SingleSubsetAggregatesEqualSubset) {
    const auto emb = view_of({{1, 0}, {1, 1}, {0, 1}, {-1, 0.2}});
    StsDataset ds;
    ds.subsets.push_back({"only", {{0, 1, 4.0}, {0, 2, 1.0}, {1, 2, 3.0}, {0, 3, 0.5}}});
    const auto r = evaluate(emb, ds);
    ASSERT_EQ(r.per_subset.size(), 1u);
    EXPECT_EQ(r.aggregate_mean.pearson, r.per_subset[0].scores.pearson);
    EXPECT_EQ(r.aggregate_pooled.pearson, r.per_subset[0].scores.pearson);
    EXPECT_EQ(r.aggregate_pooled.spearman, r.per_subset[0].scores.spearman);
}

TEST(Evaluate, MeanIsUnweightedOverSubsets) {
    const auto emb = view_of({{1, 0}, {1, 1}, {0, 1}, {-1, 0.2}, {0.3, -1}});
    const auto r = evaluate(emb, two_subsets());
    ASSERT_EQ(r.per_subset.size(), 2u);
    EXPECT_NEAR(r.aggregate_mean.pearson, (r.per_subset[0].scores.pearson + r.per_subset[1].scores.pearson) / 2, 1e-12);
    EXPECT_NEAR(r.aggregate_mean.spearman, (r.per_subset[0].scores.spearman + r.per_subset[1].scores.spearman) / 2, 1e-12);
    EXPECT_EQ(r.aggregate_pooled.n_pairs, 7u);
    for (const auto& s : r.per_subset) {
        EXPECT_LE(std::abs(s.scores.pearson), 1.0);
        EXPECT_LE(std::abs(s.scores.spearman), 1.0);
    }
}

TEST(Evaluate, GoldEqualToPredictionGivesOne) {
    const auto emb = view_of({{1, 0}, {1, 1}, {0, 1}, {-1, 0.2}, {0.3, -1}});
    StsDataset ds = two_subsets();
    for (auto& s : ds.subsets) {
        const auto y = predict_similarities(emb, s.records);
        for (std::size_t i = 0; i < y.size(); ++i) s.records[i].gold = y[i];
    }
    const auto r = evaluate(emb, ds);
    EXPECT_NEAR(r.aggregate_mean.pearson, 1.0, 1e-12);
    EXPECT_NEAR(r.aggregate_mean.spearman, 1.0, 1e-12);
    EXPECT_NEAR(r.aggregate_pooled.pearson, 1.0, 1e-12);
}

TEST(Evaluate, ScaleInvariant) {
    std::mt19937_64 gen(3);
    const Matrix m = oracle::random_matrix(5, 3, gen);
    const auto r1 = evaluate(EmbeddingView("v", m), two_subsets());
    const auto r2 = evaluate(EmbeddingView("v", 4.25 * m), two_subsets());
    EXPECT_NEAR(r1.aggregate_pooled.pearson, r2.aggregate_pooled.pearson, 1e-12);
    EXPECT_NEAR(r1.aggregate_mean.spearman, r2.aggregate_mean.spearman, 1e-12);
}

TEST(Evaluate, Errors) {
    const auto emb = view_of({{1, 0}, {0, 1}});
    StsDataset ds;
    ds.subsets.push_back({"x", {{0, 1, 1.0}, {0, 7, 2.0}}});
    EXPECT_THROW(evaluate(emb, ds), InvalidInput);
    EXPECT_THROW(evaluate(emb, StsDataset{}), InvalidInput);
}

TEST(Report, JsonFieldNames) {
    const auto emb = view_of({{1, 0}, {1, 1}, {0, 1}, {-1, 0.2}, {0.3, -1}});
    const auto j = to_json(evaluate(emb, two_subsets()));
    ASSERT_EQ(j["subsets"].size(), 2u);
    for (const char* key : {"subset", "n", "pearson", "spearman"}) {
        EXPECT_TRUE(j["subsets"][0].contains(key)) << key;
        EXPECT_TRUE(j["aggregate_mean"].contains(key)) << key;
        EXPECT_TRUE(j["aggregate_pooled"].contains(key)) << key;
    }
    EXPECT_EQ(j["subsets"][1]["subset"], "b");
    EXPECT_EQ(j["subsets"][1]["n"], 3);
    const std::string table = format_table(evaluate(emb, two_subsets()));
    EXPECT_NE(table.find("pooled"), std::string::npos);
}
