#include <cmath>

#include <gtest/gtest.h>

#include "reference.hpp"

using namespace flowcat;

namespace {

PairingQuery category_query(int from, int to, std::size_t a, std::size_t b, int integrand, int chain)
{
    PairingQuery q;
    q.kind = PairingKind::category;
    q.segments = {{'C', from, to}};
    q.a = a;
    q.b = b;
    q.integrand_degree = integrand;
    q.chain_dim = chain;
    return q;
}

} // namespace

TEST(CircleKernel, ValuesAwayFromAndAtTheDiagonal)
{
    CircleDefiningData d;
    EXPECT_NEAR(circle_kernel(d, 0.0, M_PI), 0.0, 1e-15);
    EXPECT_NEAR(circle_kernel(d, 0.0, 1e-12), 0.5, 1e-9);
    EXPECT_NEAR(circle_kernel(d, 1e-12, 0.0), -0.5, 1e-9);
    EXPECT_EQ(d.kernel_averaged(1.0, 1.0), 0.0);
}

TEST(CircleKernel, ShiftedVariant)
{
    CircleDefiningData d{0.25};
    EXPECT_NEAR(circle_kernel(d, 0.0, M_PI), 0.25, 1e-15);
    EXPECT_EQ(d.kernel_averaged(2.0, 2.0), 0.25);
}

TEST(CircleKernel, HomotopyIdentityOnFourierModes)
{
    CircleDefiningData d;
    for (int n = -8; n <= 8; ++n) EXPECT_LT(circle_homotopy_residual(d, n, 1u << 15), 1e-6) << "mode " << n;
}

TEST(CircleKernel, KernelFactorOnCohomologyBasis)
{
    QMatrix k = circle_kernel_factor(CircleDefiningData{});
    ASSERT_EQ(k.rows(), 2u);
    // Only dtheta against the dual of 1 has top degree; the sawtooth averages to zero.
    EXPECT_TRUE(k.is_zero());
    QMatrix shifted = circle_kernel_factor(CircleDefiningData{0.25});
    EXPECT_EQ(shifted(1, 0), Rational(1, 4));
    EXPECT_EQ(shifted(0, 0), 0);
    EXPECT_EQ(shifted(0, 1), 0);
    EXPECT_EQ(shifted(1, 1), 0);
}

TEST(Quadrature, MorseBottRawValuesAreUnitAndOpposite)
{
    auto raw = morsebott_raw_values(build_morsebott_s2_example());
    ASSERT_EQ(raw.size(), 2u);
    EXPECT_NEAR(std::abs(raw[0]), 1.0, 1e-9);
    EXPECT_NEAR(std::abs(raw[1]), 1.0, 1e-9);
    EXPECT_NEAR(raw[0] + raw[1], 0.0, 1e-9);
}

TEST(Quadrature, DegreeMismatchSkipsIntegration)
{
    QuadratureOracle q;
    auto v = q.query(category_query(0, 1, 0, 0, 0, 1));
    EXPECT_TRUE(v.is_exact);
    EXPECT_EQ(v.exact, 0);
    EXPECT_THROW(q.query(category_query(0, 1, 0, 0, 1, 1)), OracleMissingPairing);
}

TEST(Quadrature, TripleChartAgainstAdaptiveSimpson)
{
    CircleDefiningData d;
    Chart c = kernel_triple_chart(d);
    auto r = integrate_cube(c.density, c.dim);
    double check = adaptive_simpson([](double u) { return (0.5 - u) * u; }, 0.0, 1.0, 1e-12);
    EXPECT_NEAR(check, -1.0 / 12.0, 1e-10);
    EXPECT_NEAR(r.value, check, 1e-8);
    QuadratureOracle q;
    auto v = q.evaluate(c);
    EXPECT_TRUE(v.snapped);
    EXPECT_EQ(v.exact, Rational(-1, 12));
}

TEST(Quadrature, RepeatedEvaluationIsBitIdentical)
{
    auto fc = build_morsebott_s2_example();
    auto a = morsebott_raw_values(fc);
    auto b = morsebott_raw_values(fc);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(std::memcmp(&a[i], &b[i], sizeof(double)), 0);
}

TEST(Snap, RecognisesSmallDenominators)
{
    auto s = snap_rational(1.0 / 3.0 + 1e-9);
    EXPECT_TRUE(s.snapped);
    EXPECT_EQ(s.value, Rational(1, 3));
    EXPECT_FALSE(snap_rational(0.1234567).snapped);
}

TEST(Tabulated, EmptyTableGivesZero)
{
    TabulatedOracle t;
    EXPECT_EQ(t.query(category_query(0, 1, 0, 0, 1, 1)).exact, 0);
}

TEST(Tabulated, SingleEntry)
{
    TabulatedOracle t;
    t.set(PairingKind::category, {{'C', 0, 1}}, 0, 1, Rational(-3, 2));
    EXPECT_EQ(t.query(category_query(0, 1, 0, 1, 1, 1)).exact, Rational(-3, 2));
    EXPECT_EQ(t.query(category_query(0, 1, 1, 0, 1, 1)).exact, 0);
    EXPECT_EQ(category_query(0, 1, 0, 1, 1, 1).key(), "category|C0:1|0|1");
}

TEST(MorseCounts, EmptyAndTorus)
{
    MorseCountOracle empty;
    EXPECT_EQ(empty.morse_pairing(0, 1, 0, 0), 0);
    auto fc = build_morse_flow_category(torus_height());
    auto o = std::dynamic_pointer_cast<const MorseCountOracle>(fc.oracle);
    ASSERT_TRUE(o);
    for (const auto& [ij, m] : o->counts)
        for (std::size_t a = 0; a < m.rows(); ++a)
            for (std::size_t b = 0; b < m.cols(); ++b) EXPECT_EQ(m(a, b), 0);
}

TEST(Dirac, InsertedDiagonalMatchesFiberIntegral)
{
    auto a = [](double t) { return 1.0 + 0.5 * std::cos(t) + 0.25 * std::sin(2 * t); };
    auto r = dirac_consistency(a);
    EXPECT_NEAR(r.fiber, 1.0, 1e-10);
    const double sign = r.sign_exponent % 2 ? -1.0 : 1.0;
    ASSERT_FALSE(r.inserted.empty());
    for (double v : r.inserted) EXPECT_NEAR(v, sign * r.fiber, 1e-3);
    EXPECT_LE(std::abs(r.inserted.back() - sign * r.fiber), std::abs(r.inserted.front() - sign * r.fiber) + 1e-12);
}
