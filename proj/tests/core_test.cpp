#include "metaemb/core.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace metaemb;

using testutil::view_of;

TEST(LengthNormalize, ThreeFourFive) {
    const auto out = length_normalize(view_of({{3, 4}}));
    EXPECT_DOUBLE_EQ(out.matrix()(0, 0), 0.6);
    EXPECT_DOUBLE_EQ(out.matrix()(0, 1), 0.8);
}

TEST(LengthNormalize, ZeroRowPassesThrough) {
    const auto out = length_normalize(view_of({{0, 0}, {1, 0}}));
    EXPECT_EQ(out.matrix()(0, 0), 0.0);
    EXPECT_EQ(out.matrix()(0, 1), 0.0);
    EXPECT_EQ(out.matrix()(1, 0), 1.0);
}

TEST(LengthNormalize, UniformVector) {
    const auto out = length_normalize(view_of({{1, 1, 1, 1}}));
    for (Index c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(out.matrix()(0, c), 0.5);
}

TEST(LengthNormalize, RejectsNonFinite) {
    Matrix m(1, 2);
    m << 1.0, std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(EmbeddingView("v", m), InvalidInput);
    m << 1.0, std::numeric_limits<double>::infinity();
    EXPECT_THROW(EmbeddingView("v", m), InvalidInput);
}

TEST(LengthNormalize, IdempotentAndUnitNorm) {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix m = oracle::random_matrix(15, 1 + trial % 6, gen, 1.0 + trial);
        m.row(3).setZero();
        const auto once = length_normalize(EmbeddingView("v", m));
        const auto twice = length_normalize(once);
        EXPECT_LT((once.matrix() - twice.matrix()).cwiseAbs().maxCoeff(), 1e-12);
        for (Index r = 0; r < m.rows(); ++r) {
            if (r == 3) {
                EXPECT_EQ(once.matrix().row(r).norm(), 0.0);
            } else {
                EXPECT_NEAR(once.matrix().row(r).norm(), 1.0, 1e-12);
            }
        }
    }
}

TEST(ColumnMeans, Examples) {
    const Vector a = column_means(view_of({{1, 2}, {3, 4}}));
    EXPECT_DOUBLE_EQ(a(0), 2.0);
    EXPECT_DOUBLE_EQ(a(1), 3.0);
    const Vector b = column_means(view_of({{5, 7}}));
    EXPECT_DOUBLE_EQ(b(0), 5.0);
    EXPECT_DOUBLE_EQ(b(1), 7.0);
    const Vector c = column_means(view_of({{1, 0}, {-1, 0}, {0, 0}}));
    EXPECT_EQ(c(0), 0.0);
    EXPECT_EQ(c(1), 0.0);
}

TEST(ColumnMeans, EmptyMatrixRejected) { EXPECT_THROW(column_means(Matrix(0, 3)), InvalidInput); }

TEST(ColumnMeans, CenteredMatrixHasZeroMean) {
    std::mt19937_64 gen(11);
    const Matrix m = oracle::random_matrix(40, 5, gen, 3.0).array() + 10.0;
    const Matrix centered = m.rowwise() - column_means(m).transpose();
    EXPECT_LT(column_means(centered).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(EnsembleBatch, Invariants) {
    EXPECT_THROW(EnsembleBatch({}), InvalidInput);
    EXPECT_THROW(EnsembleBatch({view_of({{1, 1}}, "a"), view_of({{2, 0}, {0, 1}}, "b")}), InvalidInput);
    EXPECT_THROW(EnsembleBatch({view_of({{1}}, "a"), view_of({{2}}, "a")}), InvalidInput);
    EXPECT_THROW(EmbeddingView("empty", Matrix(0, 2)), InvalidInput);

    const EnsembleBatch b({view_of({{1, 2}}, "a"), view_of({{1, 2, 3}}, "b")});
    EXPECT_EQ(b.total_dim(), 5);
    EXPECT_EQ(b.without(0).encoder_ids(), std::vector<std::string>{"b"});
}

TEST(Rng, DeterministicAndInRange) {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const double x = a.uniform(-0.5, 0.5);
        EXPECT_EQ(x, b.uniform(-0.5, 0.5));
        EXPECT_GE(x, -0.5);
        EXPECT_LE(x, 0.5);
    }
}
