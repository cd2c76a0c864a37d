#include <random>

#include <gtest/gtest.h>

#include "reference.hpp"

using namespace flowcat;

namespace {

QMatrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, int spread = 3)
{
    std::uniform_int_distribution<int> pick(-spread, spread);
    std::uniform_int_distribution<int> den(1, 4);
    QMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            m(i, j) = Rational(pick(rng), den(rng));
            m(i, j).canonicalize();
        }
    return m;
}

} // namespace

TEST(Rational, ParsesAndReduces)
{
    Rational q = parse_rational("6/-4");
    EXPECT_EQ(q, Rational(-3, 2));
    EXPECT_EQ(format_rational(q), "-3/2");
    EXPECT_EQ(format_rational(parse_rational(" 4/2 ")), "2");
    EXPECT_GT(q.get_den(), 0);
}

TEST(Rational, RejectsMalformedText)
{
    EXPECT_THROW(parse_rational(""), ParseError);
    EXPECT_THROW(parse_rational("1/0"), ParseError);
    EXPECT_THROW(parse_rational("x"), ParseError);
}

TEST(Rank, Identity) { EXPECT_EQ(rank(QMatrix::identity(2)), 2u); }

TEST(Rank, ZeroMatrix) { EXPECT_EQ(rank(QMatrix(3, 5)), 0u); }

TEST(Rank, DependentRows)
{
    QMatrix m = QMatrix::from_rows({{1, 2}, {2, 4}});
    EXPECT_EQ(ref::rank_rref(m), 1u);
    EXPECT_EQ(rank(m), ref::rank_rref(m));
}

TEST(Kernel, IdentityHasNone) { EXPECT_TRUE(kernel_basis(QMatrix::identity(3)).empty()); }

TEST(Kernel, ZeroMatrixGivesStandardBasis)
{
    auto k = kernel_basis(QMatrix(2, 3));
    ASSERT_EQ(k.size(), 3u);
    EXPECT_EQ(span_rank(k, 3), 3u);
}

TEST(Kernel, SingleRow)
{
    auto k = kernel_basis(QMatrix::from_rows({{1, 1}}));
    ASSERT_EQ(k.size(), 1u);
    // Solve x + y = 0 directly: every solution is a multiple of (1, -1).
    EXPECT_EQ(k[0][0] + k[0][1], 0);
    EXPECT_NE(k[0][0], 0);
}

TEST(Quotient, EmptySub)
{
    std::vector<QVector> amb{{1, 0}, {0, 1}};
    EXPECT_EQ(quotient_dimension(std::vector<QVector>{}, amb), 2u);
}

TEST(Quotient, SubEqualsAmbient)
{
    std::vector<QVector> amb{{1, 0}, {0, 1}};
    EXPECT_EQ(quotient_dimension(amb, amb), 0u);
}

TEST(Quotient, OneLine)
{
    std::vector<QVector> sub{{1, 0}};
    std::vector<QVector> amb{{1, 0}, {1, 1}};
    EXPECT_EQ(ref::rank_rref(QMatrix::from_columns(2, amb)) - ref::rank_rref(QMatrix::from_columns(2, sub)), 1u);
    EXPECT_EQ(quotient_dimension(sub, amb), 1u);
}

TEST(Quotient, RejectsSubOutsideAmbient)
{
    std::vector<QVector> sub{{0, 1}};
    std::vector<QVector> amb{{1, 0}};
    EXPECT_THROW(quotient_dimension(sub, amb), SubNotContained);
}

TEST(MatrixShape, MismatchedProductThrows)
{
    EXPECT_THROW(QMatrix(2, 3) * QMatrix(2, 3), ShapeMismatch);
    EXPECT_THROW(QMatrix(2, 3) + QMatrix(3, 2), ShapeMismatch);
}

TEST(Inverse, SingularThrows) { EXPECT_THROW(inverse(QMatrix::from_rows({{1, 2}, {2, 4}})), SingularMatrix); }

TEST(LinalgProperties, RankNullity)
{
    std::mt19937_64 rng(11);
    for (int t = 0; t < 60; ++t) {
        std::size_t r = 1 + rng() % 6, c = 1 + rng() % 6;
        QMatrix m = random_matrix(rng, r, c);
        if (t % 3 == 0) m = m * random_matrix(rng, c, c);
        if (t % 4 == 0 && r > 1)
            for (std::size_t j = 0; j < c; ++j) m(r - 1, j) = m(0, j) * 2;
        auto k = kernel_basis(m);
        EXPECT_EQ(rank(m) + k.size(), c);
        EXPECT_EQ(rank(m), ref::rank_rref(m));
        for (const auto& v : k) {
            auto mv = m * v;
            for (const auto& x : mv) EXPECT_EQ(x, 0);
        }
    }
}

TEST(LinalgProperties, RankOfProductIsBounded)
{
    std::mt19937_64 rng(5);
    for (int t = 0; t < 40; ++t) {
        std::size_t a = 1 + rng() % 5, b = 1 + rng() % 5, c = 1 + rng() % 5;
        QMatrix x = random_matrix(rng, a, b, 1);
        QMatrix y = random_matrix(rng, b, c, 1);
        EXPECT_LE(rank(x * y), std::min(rank(x), rank(y)));
    }
}

TEST(LinalgProperties, EliminationFactorsReproduceInput)
{
    std::mt19937_64 rng(17);
    for (int t = 0; t < 40; ++t) {
        std::size_t r = 1 + rng() % 6, c = 1 + rng() % 6;
        QMatrix m = random_matrix(rng, r, c);
        if (t % 2 == 0 && r > 2)
            for (std::size_t j = 0; j < c; ++j) m(1, j) = m(0, j) * 3;
        auto f = plu(m);
        EXPECT_TRUE(f.p * m == f.l * f.u);
    }
}

TEST(LinalgProperties, InverseAndSolve)
{
    std::mt19937_64 rng(23);
    for (int t = 0; t < 30; ++t) {
        std::size_t n = 1 + rng() % 5;
        QMatrix m = random_matrix(rng, n, n);
        if (rank(m) < n) continue;
        QMatrix inv = inverse(m);
        EXPECT_TRUE(inv * m == QMatrix::identity(n));
        QVector b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = Rational(static_cast<long>(i) - 1);
        auto x = solve(m, b);
        ASSERT_TRUE(x.has_value());
        EXPECT_EQ(m * *x, b);
    }
}

TEST(LinalgProperties, LeftInverseOfInjectiveMap)
{
    QMatrix a = QMatrix::from_rows({{1, 0}, {2, 1}, {0, 3}});
    EXPECT_TRUE(left_inverse(a) * a == QMatrix::identity(2));
    EXPECT_THROW(left_inverse(QMatrix::from_rows({{1, 2}, {2, 4}})), SingularMatrix);
}
