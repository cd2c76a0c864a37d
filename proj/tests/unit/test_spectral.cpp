#include <random>

#include <gtest/gtest.h>

#include "reference.hpp"

using namespace flowcat;

namespace {

// Three one-dimensional levels with only a level-two jump x0 -> x2.
GradedComplex long_jump()
{
    GradedComplex c;
    c.add_level(0, {{"x0", 0}});
    c.add_level(1, {{"x1", 3}});
    c.add_level(2, {{"x2", 1}});
    c.set_block(0, 2, ref::q1(1));
    return c;
}

// dim F_p H^q computed from scratch: cocycles at levels >= p modulo
// coboundaries of anything, intersected with that subspace.
std::size_t filtered_h(const GradedComplex& c, int p, int q)
{
    QMatrix d = c.total_differential();
    auto deg = c.total_degrees();
    auto lv = c.level_of_position();
    std::vector<std::size_t> sub;
    for (std::size_t i = 0; i < deg.size(); ++i)
        if (deg[i] == q && lv[i] >= p) sub.push_back(i);
    auto all_src = positions_of_degree(deg, q - 1);
    auto tgt = positions_of_degree(deg, q + 1);
    QMatrix dsub = d.select(tgt, sub);
    std::size_t z = sub.size() - ref::rank_rref(dsub);
    // dim (Z_p + B) - dim B = dim Z_p - dim (Z_p cap B)
    std::vector<QVector> zb;
    for (const auto& k : kernel_basis(dsub)) {
        QVector full(c.total_size());
        for (std::size_t i = 0; i < sub.size(); ++i) full[sub[i]] = k[i];
        zb.push_back(full);
    }
    std::vector<QVector> b;
    for (std::size_t j : all_src) {
        QVector col(c.total_size());
        for (std::size_t i = 0; i < c.total_size(); ++i) col[i] = d(i, j);
        b.push_back(col);
    }
    std::vector<QVector> both = zb;
    both.insert(both.end(), b.begin(), b.end());
    std::size_t inter = z + span_rank(b, c.total_size()) - span_rank(both, c.total_size());
    return z - inter;
}

} // namespace

TEST(Pages, ZeroDifferentialIsStableAtOnce)
{
    GradedComplex c;
    c.add_level(0, {{"a", 0}});
    c.add_level(1, {{"b", 2}});
    auto pages = compute_pages(FilteredComplex(c), 3);
    for (const auto& pg : pages) {
        EXPECT_TRUE(pg.checks.empty());
        EXPECT_EQ(pg.level_dims(), (std::map<int, std::size_t>{{0, 1}, {1, 1}}));
    }
}

TEST(Pages, MorseSphere)
{
    auto c = assemble_differential(build_morse_flow_category(sphere_height()));
    auto e1 = compute_page(FilteredComplex(c), 1);
    auto e2 = compute_page(FilteredComplex(c), 2);
    EXPECT_EQ(e1.dims(), e2.dims());
    EXPECT_EQ(e2.dims(), (std::map<std::pair<int, int>, std::size_t>{{{0, 0}, 1}, {{1, 2}, 1}}));
}

TEST(Pages, MorseBottSphere)
{
    auto c = assemble_differential(build_morsebott_s2_example());
    auto pages = compute_pages(FilteredComplex(c), 3);
    EXPECT_EQ(pages[0].level_dims(), (std::map<int, std::size_t>{{0, 2}, {1, 2}}));
    EXPECT_EQ(rank(page_differential(pages[0], 0)), 1u);
    EXPECT_EQ(pages[1].level_dims(), (std::map<int, std::size_t>{{0, 1}, {1, 1}}));
    EXPECT_EQ(pages[2].dims(), pages[1].dims());
    for (const auto& pg : pages) EXPECT_TRUE(pg.checks.empty());
}

TEST(Pages, SecondDifferentialIsTheJumpBlock)
{
    auto c = long_jump();
    auto pages = compute_pages(FilteredComplex(c), 3);
    EXPECT_TRUE(page_differential(pages[0], 0).is_zero());
    QMatrix d2 = page_differential(pages[1], 0, 0);
    ASSERT_EQ(d2.rows(), 1u);
    ASSERT_EQ(d2.cols(), 1u);
    EXPECT_EQ(d2(0, 0), c.block(0, 2)(0, 0));
    EXPECT_EQ(pages[2].level_dims(), (std::map<int, std::size_t>{{0, 0}, {1, 1}, {2, 0}}));
    EXPECT_TRUE(pages[2].checks.empty());
}

TEST(Pages, WitnessesCarryTheZigZag)
{
    GradedComplex c;
    c.add_level(0, {{"x", 0}});
    c.add_level(1, {{"u", 0}, {"w", 1}});
    c.add_level(2, {{"z", 1}});
    c.set_block(1, 0, QMatrix::from_rows({{0, 0}, {1, 0}}));
    c.set_block(0, 1, QMatrix::from_rows({{0}, {2}}));
    c.set_block(1, 1, QMatrix::from_rows({{3, 0}}));
    ASSERT_TRUE(verify_d_squared(c).empty());
    auto e2 = compute_page(FilteredComplex(c), 2);
    ASSERT_EQ(e2.dim(0, 0), 1u);
    ASSERT_EQ(e2.dim(2, 1), 1u);
    // By hand: x - 2u is the lift, and d(x - 2u) = -6z.
    Rational lead = e2.entries.at({0, 0}).reps[0][c.offset(0)];
    Rational tail = e2.entries.at({2, 1}).reps[0][c.offset(2)];
    auto w = e2.witnesses(0, 0, 0);
    ASSERT_TRUE(w.count(1));
    EXPECT_EQ(w.at(1)[0] / lead, -2);
    EXPECT_EQ(w.at(1)[1], 0);
    EXPECT_EQ(page_differential(e2, 0, 0)(0, 0) * tail / lead, -6);
}

TEST(Pages, RejectsBadIndex)
{
    EXPECT_THROW(compute_pages(FilteredComplex(long_jump()), 0), BadSequence);
}

TEST(EInfinity, MatchesFilteredCohomology)
{
    std::vector<GradedComplex> cases{long_jump(), assemble_differential(build_morsebott_s2_example()),
                                     assemble_differential(build_morse_flow_category(torus_height()))};
    std::mt19937_64 rng(seed_from_env());
    for (int i = 0; i < 20; ++i) cases.push_back(random_filtered_complex(rng).complex);
    for (const auto& c : cases) {
        FilteredComplex fc(c);
        EXPECT_TRUE(e_infinity_vs_graded(fc).empty());
        auto einf = compute_page(fc, stable_page(c) + 1);
        for (int p : c.level_indices())
            for (int q : degree_set(c)) EXPECT_EQ(einf.dim(p, q), filtered_h(c, p, q) - filtered_h(c, p + 1, q)) << p << "," << q;
    }
}

TEST(EInfinity, PagesStabilise)
{
    std::mt19937_64 rng(seed_from_env() + 1);
    for (int i = 0; i < 10; ++i) {
        auto c = random_filtered_complex(rng).complex;
        int s = stable_page(c);
        auto pages = compute_pages(FilteredComplex(c), s + 2);
        EXPECT_EQ(pages[s].dims(), pages[s + 1].dims());
        for (const auto& pg : pages) {
            EXPECT_TRUE(pg.checks.empty());
            for (int p : c.level_indices()) {
                QMatrix a = page_differential(pg, p);
                QMatrix b = page_differential(pg, p + pg.r);
                if (a.rows() && b.cols() && b.cols() == a.rows()) EXPECT_TRUE((b * a).is_zero());
            }
        }
    }
}

TEST(Naturality, IdentityInducesIdentityOnFirstPage)
{
    auto c = assemble_differential(build_morsebott_s2_example());
    auto e1 = compute_page(FilteredComplex(c), 1);
    auto id = ChainMap::identity(c);
    for (const auto& [pq, n] : e1.dims()) {
        QMatrix m = induced_page_map(id, e1, e1, pq.first, pq.second);
        EXPECT_TRUE(m == QMatrix::identity(n));
    }
}

TEST(Naturality, CommutesWithFirstDifferential)
{
    auto demo = continuation_s2();
    auto f = assemble_morphism_map(demo.morphism);
    auto pa = compute_page(FilteredComplex(f.source), 1);
    auto pb = compute_page(FilteredComplex(f.target), 1);
    for (int p : f.source.level_indices())
        for (int q : degree_set(f.source)) {
            QMatrix lhs_f = induced_page_map(f, pa, pb, p + 1, q + 1);
            QMatrix da = page_differential(pa, p, q);
            QMatrix db = page_differential(pb, p, q);
            QMatrix rhs_f = induced_page_map(f, pa, pb, p, q);
            if (lhs_f.cols() == da.rows() && db.cols() == rhs_f.rows() && lhs_f.rows() && da.cols())
                EXPECT_TRUE(lhs_f * da == db * rhs_f);
        }
}

TEST(ConeComparison, SecondPageOfConeMatchesConeOfFirstPageMap)
{
    auto fc = build_morsebott_s2_example();
    auto r = cone_first_page(assemble_morphism_map(identity_morphism(fc)));
    EXPECT_TRUE(r.agree());
    auto demo = continuation_s2();
    EXPECT_TRUE(cone_first_page(assemble_morphism_map(demo.morphism)).agree());
}
