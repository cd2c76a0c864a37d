#include <random>

#include <gtest/gtest.h>

#include "reference.hpp"

using namespace flowcat;

namespace {

// Levels 0 (x, degree 0), 1 (u -> w acyclic, degrees 0,1), 2 (z, degree 1),
// with d_1 x = a w, d_1 u = b z and d_2 x = c z.
struct ThreeLevel {
    GradedComplex big;
    PerturbationData pd;
};

ThreeLevel three_level(long a, long b, long c)
{
    ThreeLevel t;
    t.big.add_level(0, {{"x", 0}});
    t.big.add_level(1, {{"u", 0}, {"w", 1}});
    t.big.add_level(2, {{"z", 1}});
    t.big.set_block(1, 0, QMatrix::from_rows({{0, 0}, {1, 0}}));
    t.big.set_block(0, 1, QMatrix::from_rows({{0}, {Rational(a)}}));
    t.big.set_block(1, 1, QMatrix::from_rows({{Rational(b), 0}}));
    if (c != 0) t.big.set_block(0, 2, ref::q1(c));
    t.pd.p[0] = QMatrix::identity(1);
    t.pd.h[0] = QMatrix(1, 1);
    t.pd.p[1] = QMatrix(2, 2);
    t.pd.h[1] = QMatrix::from_rows({{0, 1}, {0, 0}});
    t.pd.p[2] = QMatrix::identity(1);
    t.pd.h[2] = QMatrix(1, 1);
    return t;
}

} // namespace

TEST(PerturbationData, IdentityProjectionPasses)
{
    auto t = three_level(2, 3, 0);
    EXPECT_TRUE(verify_perturbation_data(t.big, trivial_data(t.big)).empty());
    GradedComplex c;
    c.add_level(0, {{"x", 0}});
    c.add_level(1, {{"y", 1}});
    c.set_block(0, 1, ref::q1(1));
    EXPECT_TRUE(verify_perturbation_data(c, trivial_data(c)).empty());
}

TEST(PerturbationData, ZeroProjectionFailsOnNonzeroLevel)
{
    GradedComplex c;
    c.add_level(0, {{"x", 0}});
    PerturbationData pd;
    pd.p[0] = QMatrix(1, 1);
    pd.h[0] = QMatrix(1, 1);
    EXPECT_FALSE(verify_perturbation_data(c, pd).empty());
}

TEST(PerturbationData, HarmonicDataOnAcyclicLevel)
{
    auto t = three_level(2, 3, 0);
    // d0 = [0 -> 1], p = 0, H inverts d0 on its image: id = d0 H + H d0.
    QMatrix d0 = t.big.block(1, 0);
    EXPECT_TRUE(d0 * t.pd.h[1] + t.pd.h[1] * d0 == QMatrix::identity(2));
    EXPECT_TRUE(verify_perturbation_data(t.big, t.pd).empty());
}

TEST(PerturbationData, MissingLevelThrows)
{
    auto t = three_level(1, 1, 0);
    t.pd.p.erase(2);
    EXPECT_THROW(verify_perturbation_data(t.big, t.pd), ShapeMismatch);
}

TEST(PerturbedOperator, HandMultipliedThreeLevelChain)
{
    auto t = three_level(2, 3, 0);
    ASSERT_TRUE(verify_d_squared(t.big).empty());
    // p_2 d_1 (-H_1) d_1 iota_0 on one-dimensional ends: 1 * 3 * (-1) * 2 * 1.
    QMatrix m = perturbed_operator(t.big, t.pd, 0, 2, {0, 1, 2});
    ASSERT_EQ(m.rows(), 1u);
    ASSERT_EQ(m.cols(), 1u);
    EXPECT_EQ(m(0, 0), Rational(1 * 3 * -1 * 2 * 1));
    EXPECT_EQ(perturbed_operator(t.big, t.pd, 0, 2, {0, 2})(0, 0), 0);
}

TEST(PerturbedOperator, RejectsBadSequences)
{
    auto t = three_level(2, 3, 0);
    EXPECT_THROW(perturbed_operator(t.big, t.pd, 0, 2, {0, 2, 1}), BadSequence);
    EXPECT_THROW(perturbed_operator(t.big, t.pd, 0, 2, {1, 2}), BadSequence);
}

TEST(PerturbedComplex, SumsOverSequences)
{
    auto t = three_level(2, 3, 5);
    ASSERT_TRUE(verify_d_squared(t.big).empty());
    auto small = perturbed_complex(t.big, t.pd);
    EXPECT_EQ(small.size(1), 0u);
    EXPECT_EQ(small.block(0, 2)(0, 0), Rational(5 - 6));
    EXPECT_EQ(cohomology_betti(small), ref::betti(t.big));
}

TEST(PerturbedComplex, TrivialDataIsIdentity)
{
    auto fc = build_morsebott_s2_example();
    auto c = assemble_differential(fc);
    auto small = perturbed_complex(c, trivial_data(c));
    EXPECT_TRUE(small.total_differential() == c.total_differential());
}

TEST(PerturbedComplex, NoHigherBlocksGivesLevelCohomology)
{
    GradedComplex c;
    c.add_level(0, {{"x", 0}, {"y", 1}, {"z", 1}});
    c.set_block(0, 0, QMatrix::from_rows({{0, 0, 0}, {1, 0, 0}, {0, 0, 0}}));
    c.add_level(1, {{"w", 2}});
    auto small = perturbed_complex(c, harmonic_data(c));
    EXPECT_TRUE(small.total_differential().is_zero());
    EXPECT_EQ(small.total_size(), 2u);
    EXPECT_EQ(cohomology_betti(small), ref::betti(c));
}

TEST(PerturbedComplex, MorseComplexIsAlreadyMinimal)
{
    auto c = assemble_differential(ref::morse_pair());
    auto small = perturbed_complex(c, harmonic_data(c));
    EXPECT_TRUE(small.total_differential() == c.total_differential());
}

TEST(PerturbedComplex, RandomFamilyPreservesBetti)
{
    std::mt19937_64 rng(seed_from_env());
    for (int i = 0; i < 100; ++i) {
        auto rf = random_filtered_complex(rng);
        ASSERT_TRUE(verify_d_squared(rf.complex).empty());
        auto pd = harmonic_data(rf.complex);
        ASSERT_TRUE(verify_perturbation_data(rf.complex, pd).empty());
        auto small = perturbed_complex(rf.complex, pd);
        EXPECT_TRUE(verify_d_squared(small).empty());
        EXPECT_EQ(cohomology_betti(small), rf.expected_betti);
        EXPECT_EQ(cohomology_betti(rf.complex), rf.expected_betti);
        for (const auto& [key, m] : small.blocks)
            if (key.second == 0) EXPECT_TRUE(m.is_zero());
    }
}

TEST(PerturbedComplex, ReductionLevelModel)
{
    auto doc = load_document(ref::fixture("hpl-small.json"));
    auto big = assemble_differential(doc.model);
    auto small = perturbed_complex(big, harmonic_data(big));
    EXPECT_EQ(small.total_size(), 4u);
    EXPECT_TRUE(verify_d_squared(small).empty());
    EXPECT_EQ(cohomology_betti(small), ref::betti(big));
}
