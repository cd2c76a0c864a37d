#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "complexes.hpp"

namespace flowcat {

// F_p is spanned by the generators at levels >= p.
struct FilteredComplex {
    GradedComplex complex;

    explicit FilteredComplex(GradedComplex c) : complex(std::move(c))
    {
        for (const auto& [key, m] : complex.blocks)
            if (key.second < 0 && !m.is_zero()) throw ShapeMismatch("differential lowers the filtration at level " + std::to_string(key.first));
    }
};

// One (p, q) slot of a page: representatives of Z/B as full vectors. The
// component at level p is the leading term; components above p are witnesses.
struct PageEntry {
    std::vector<QVector> reps;
    std::vector<QVector> boundary;
};

struct SpectralSequencePage {
    int r = 1;
    GradedComplex complex;
    QMatrix total_d;
    std::map<std::pair<int, int>, PageEntry> entries;
    bool witnesses_retained = true;
    Report checks;

    std::size_t dim(int p, int q) const
    {
        auto it = entries.find({p, q});
        return it == entries.end() ? 0 : it->second.reps.size();
    }

    std::map<int, std::size_t> level_dims() const
    {
        std::map<int, std::size_t> out;
        for (int p : complex.level_indices()) out[p] = 0;
        for (const auto& [key, e] : entries) out[key.first] += e.reps.size();
        return out;
    }

    std::map<std::pair<int, int>, std::size_t> dims() const
    {
        std::map<std::pair<int, int>, std::size_t> out;
        for (const auto& [key, e] : entries)
            if (!e.reps.empty()) out[key] = e.reps.size();
        return out;
    }

    // Components of the j-th representative above its leading level.
    std::map<int, QVector> witnesses(int p, int q, std::size_t j) const
    {
        if (!witnesses_retained) throw WitnessMissing("page was built without witnesses");
        const auto& x = entries.at({p, q}).reps.at(j);
        std::map<int, QVector> out;
        for (int l : complex.level_indices()) {
            if (l <= p) continue;
            QVector part(complex.size(l));
            bool any = false;
            for (std::size_t i = 0; i < part.size(); ++i) {
                part[i] = x[complex.offset(l) + i];
                if (part[i] != 0) any = true;
            }
            if (any) out[l] = part;
        }
        return out;
    }
};

namespace detail {

inline std::vector<std::size_t> filtered_positions(const GradedComplex& c, int p, std::optional<int> q)
{
    std::vector<std::size_t> out;
    auto lv = c.level_of_position();
    auto deg = c.total_degrees();
    for (std::size_t i = 0; i < lv.size(); ++i)
        if (lv[i] >= p && (!q || deg[i] == *q)) out.push_back(i);
    return out;
}

inline QVector lift(std::size_t n, const std::vector<std::size_t>& pos, const QVector& v)
{
    QVector full(n, Rational(0));
    for (std::size_t i = 0; i < pos.size(); ++i) full[pos[i]] = v[i];
    return full;
}

// Z^p_r in degree q: x in F_p of degree q with Dx in F_{p+r}.
inline std::vector<QVector> z_space(const GradedComplex& c, const QMatrix& d, int p, int r, int q)
{
    const std::size_t n = c.total_size();
    auto cols = filtered_positions(c, p, q);
    std::vector<QVector> out;
    if (cols.empty()) return out;
    auto lv = c.level_of_position();
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i)
        if (r <= 0 || lv[i] < p + r) rows.push_back(i);
    if (r <= 0 || rows.empty()) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            QVector e(cols.size(), Rational(0));
            e[j] = 1;
            out.push_back(lift(n, cols, e));
        }
        return out;
    }
    for (const auto& v : kernel_basis(d.select(rows, cols))) out.push_back(lift(n, cols, v));
    return out;
}

inline std::vector<QVector> apply(const QMatrix& d, const std::vector<QVector>& vs)
{
    std::vector<QVector> out;
    for (const auto& v : vs) out.push_back(d * v);
    return out;
}

inline QVector page_coordinates(const PageEntry& e, const QVector& y)
{
    const std::size_t n = y.size();
    std::vector<QVector> cols = e.reps;
    cols.insert(cols.end(), e.boundary.begin(), e.boundary.end());
    if (cols.empty()) {
        for (const auto& v : y)
            if (v != 0) throw SubNotContained("vector is not a cycle of the page");
        return {};
    }
    auto x = solve(QMatrix::from_columns(n, cols), y);
    if (!x) throw SubNotContained("vector is not a cycle of the page");
    return QVector(x->begin(), x->begin() + static_cast<long>(e.reps.size()));
}

} // namespace detail

inline PageEntry page_entry(const GradedComplex& c, const QMatrix& d, int p, int r, int q)
{
    PageEntry e;
    auto z = detail::z_space(c, d, p, r, q);
    e.boundary = detail::z_space(c, d, p + 1, r - 1, q);
    auto prev = detail::apply(d, detail::z_space(c, d, p - r + 1, r - 1, q - 1));
    e.boundary.insert(e.boundary.end(), prev.begin(), prev.end());
    const std::size_t n = c.total_size();
    std::vector<QVector> acc = e.boundary;
    std::size_t have = span_rank(acc, n);
    for (const auto& v : z) {
        acc.push_back(v);
        std::size_t now = span_rank(acc, n);
        if (now > have) {
            e.reps.push_back(v);
            have = now;
        } else {
            acc.pop_back();
        }
    }
    return e;
}

// The matrix of the page differential from E^{p,q}_r to E^{p+r,q+1}_r.
inline QMatrix page_differential(const SpectralSequencePage& page, int p, int q)
{
    if (!page.witnesses_retained) throw WitnessMissing("page differential needs the witness chains");
    auto src = page.entries.find({p, q});
    std::size_t ncols = src == page.entries.end() ? 0 : src->second.reps.size();
    auto tgt = page.entries.find({p + page.r, q + 1});
    std::size_t nrows = tgt == page.entries.end() ? 0 : tgt->second.reps.size();
    QMatrix out(nrows, ncols);
    if (ncols == 0 || nrows == 0) return out;
    for (std::size_t j = 0; j < ncols; ++j) {
        auto c = detail::page_coordinates(tgt->second, page.total_d * src->second.reps[j]);
        for (std::size_t i = 0; i < nrows; ++i) out(i, j) = c[i];
    }
    return out;
}

// All degrees at once, rows and columns ordered by degree then representative.
inline QMatrix page_differential(const SpectralSequencePage& page, int p)
{
    std::vector<int> qs;
    for (const auto& [key, e] : page.entries)
        if (key.first == p) qs.push_back(key.second);
    std::size_t nr = 0, nc = 0;
    for (int q : qs) {
        nc += page.dim(p, q);
        nr += page.dim(p + page.r, q + 1);
    }
    QMatrix out(nr, nc);
    std::size_t r0 = 0, c0 = 0;
    for (int q : qs) {
        QMatrix b = page_differential(page, p, q);
        out.set_block(r0, c0, b);
        r0 += b.rows();
        c0 += b.cols();
    }
    return out;
}

namespace detail {

inline SpectralSequencePage build_page(const GradedComplex& c, const QMatrix& d, int r)
{
    SpectralSequencePage page;
    page.r = r;
    page.complex = c;
    page.total_d = d;
    for (int p : c.level_indices())
        for (int q : degree_set(c)) {
            auto e = page_entry(c, d, p, r, q);
            if (!e.reps.empty() || !e.boundary.empty()) page.entries[{p, q}] = std::move(e);
        }
    for (const auto& [key, e] : page.entries) {
        auto [p, q] = key;
        auto tgt = page.entries.find({p + r, q + 1});
        for (const auto& b : e.boundary) {
            QVector y = d * b;
            if (tgt == page.entries.end()) continue;
            auto coords = page_coordinates(tgt->second, y);
            for (const auto& v : coords)
                if (v != 0) page.checks.push_back({p, q, "boundary does not map into the boundary at page " + std::to_string(r)});
        }
    }
    for (const auto& [key, e] : page.entries) {
        auto [p, q] = key;
        QMatrix a = page_differential(page, p, q);
        QMatrix b = page_differential(page, p + r, q + 1);
        if (a.cols() && b.rows() && a.rows() && !(b * a).is_zero())
            page.checks.push_back({p, q, "page differential squares to a nonzero map at page " + std::to_string(r)});
    }
    return page;
}

} // namespace detail

// Pages E_1 .. E_rmax; each page after the first is checked against the
// homology of its predecessor.
inline std::vector<SpectralSequencePage> compute_pages(const FilteredComplex& fc, int rmax)
{
    if (rmax < 1) throw BadSequence("page index must be at least 1");
    const GradedComplex& c = fc.complex;
    QMatrix d = c.total_differential();
    require_complex(c);
    std::vector<SpectralSequencePage> pages;
    for (int r = 1; r <= rmax; ++r) {
        pages.push_back(detail::build_page(c, d, r));
        if (r == 1) continue;
        const auto& prev = pages[pages.size() - 2];
        auto& cur = pages.back();
        for (int p : c.level_indices())
            for (int q : degree_set(c)) {
                QMatrix out = page_differential(prev, p, q);
                QMatrix in = page_differential(prev, p - prev.r, q - 1);
                std::size_t h = prev.dim(p, q) - rank(out) - (in.rows() && in.cols() ? rank(in) : 0);
                if (h != cur.dim(p, q))
                    cur.checks.push_back({p, q, "E_" + std::to_string(r) + " differs from the homology of E_" + std::to_string(r - 1)});
            }
    }
    return pages;
}

inline SpectralSequencePage compute_page(const FilteredComplex& fc, int r) { return compute_pages(fc, r).back(); }

inline int stable_page(const GradedComplex& c)
{
    if (c.levels.empty()) return 1;
    return c.max_level() - c.min_level() + 1;
}

// dim F_pH^q over the cohomology of the whole complex.
inline std::size_t filtered_cohomology_dim(const GradedComplex& c, const QMatrix& d, int p, int q)
{
    const std::size_t n = c.total_size();
    auto z = detail::z_space(c, d, p, 1 << 20, q);
    std::vector<QVector> b;
    auto prev = detail::filtered_positions(c, c.min_level(), q - 1);
    for (auto j : prev) {
        QVector e(n, Rational(0));
        e[j] = 1;
        b.push_back(d * e);
    }
    std::size_t rb = span_rank(b, n);
    b.insert(b.end(), z.begin(), z.end());
    return span_rank(b, n) - rb;
}

// Empty iff dim E^{p,q}_inf = dim F_pH^q / F_{p+1}H^q everywhere.
inline Report e_infinity_vs_graded(const FilteredComplex& fc)
{
    const GradedComplex& c = fc.complex;
    Report r;
    if (c.levels.empty()) return r;
    QMatrix d = c.total_differential();
    auto page = compute_page(fc, stable_page(c) + 1);
    for (int p : c.level_indices())
        for (int q : degree_set(c)) {
            std::size_t gr = filtered_cohomology_dim(c, d, p, q) - filtered_cohomology_dim(c, d, p + 1, q);
            if (gr != page.dim(p, q))
                r.push_back({p, q, "E_inf has dimension " + std::to_string(page.dim(p, q)) + ", graded piece has " + std::to_string(gr)});
        }
    return r;
}

// Induced map of a filtration-preserving chain map on E^{p,q}_r.
inline QMatrix induced_page_map(const ChainMap& f, const SpectralSequencePage& a, const SpectralSequencePage& b, int p, int q)
{
    if (f.degree != 0) throw ShapeMismatch("page maps need a degree-zero chain map");
    if (f.min_shift() < 0) throw ShapeMismatch("chain map lowers the filtration");
    QMatrix m = f.total();
    std::size_t nc = a.dim(p, q), nr = b.dim(p, q);
    QMatrix out(nr, nc);
    if (nc == 0) return out;
    for (std::size_t j = 0; j < nc; ++j) {
        QVector y = m * a.entries.at({p, q}).reps[j];
        if (nr == 0) {
            detail::page_coordinates(PageEntry{{}, b.entries.count({p, q}) ? b.entries.at({p, q}).boundary : std::vector<QVector>{}}, y);
            continue;
        }
        auto cc = detail::page_coordinates(b.entries.at({p, q}), y);
        for (std::size_t i = 0; i < nr; ++i) out(i, j) = cc[i];
    }
    return out;
}

struct ConeComparison {
    std::map<std::pair<int, int>, std::size_t> cone_e2;
    std::map<std::pair<int, int>, std::size_t> cone_of_e1;
    bool e1_split = true;

    bool agree() const { return e1_split && cone_e2 == cone_of_e1; }
};

// With the source filtration shifted down by one, E_1 of the cone splits as
// E_1(target) + E_1(source), and E_2 is the homology of the cone of the
// E_1-level map.
inline ConeComparison cone_first_page(const ChainMap& f)
{
    ConeComparison out;
    GradedComplex cone = mapping_cone(f, 1);
    auto cone_pages = compute_pages(FilteredComplex(cone), 2);
    auto pa = compute_page(FilteredComplex(f.source), 1);
    auto pb = compute_page(FilteredComplex(f.target), 1);

    // Cone of the E_1 map as a complex whose only blocks raise the level by one.
    GradedComplex e1;
    std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> slot_b, slot_a;
    std::set<int> lv;
    for (int l : f.target.level_indices()) lv.insert(l);
    for (int l : f.source.level_indices()) lv.insert(l - 1);
    std::set<int> qs = degree_set(cone);
    for (int l : lv) {
        auto& gens = e1.levels[l];
        for (int q : qs) {
            for (std::size_t j = 0; j < pb.dim(l, q); ++j) gens.push_back({"b" + std::to_string(l) + "_" + std::to_string(q) + "_" + std::to_string(j), q});
            for (std::size_t j = 0; j < pa.dim(l + 1, q + 1); ++j)
                gens.push_back({"a" + std::to_string(l + 1) + "_" + std::to_string(q + 1) + "_" + std::to_string(j), q});
        }
    }
    for (int l : lv)
        for (int q : qs)
            if (cone_pages[0].dim(l, q) != pb.dim(l, q) + pa.dim(l + 1, q + 1)) out.e1_split = false;
    const std::size_t n = e1.total_size();
    QMatrix d(n, n);
    auto place = [&](int l, int q, bool source) {
        std::size_t o = e1.offset(l);
        for (int qq : qs) {
            if (qq == q && !source) return o;
            o += pb.dim(l, qq);
            if (qq == q && source) return o;
            o += pa.dim(l + 1, qq + 1);
        }
        return o;
    };
    for (int l : lv)
        for (int q : qs) {
            // target part: d1 of B
            QMatrix db = page_differential(pb, l, q);
            if (db.rows() && db.cols()) {
                std::size_t r0 = place(l + 1, q + 1, false), c0 = place(l, q, false);
                for (std::size_t i = 0; i < db.rows(); ++i)
                    for (std::size_t j = 0; j < db.cols(); ++j) d(r0 + i, c0 + j) = db(i, j);
            }
            // source part sitting at level l holds E_1^{l+1, q+1}(A)
            QMatrix da = page_differential(pa, l + 1, q + 1);
            if (da.rows() && da.cols()) {
                std::size_t r0 = place(l + 1, q + 1, true), c0 = place(l, q, true);
                for (std::size_t i = 0; i < da.rows(); ++i)
                    for (std::size_t j = 0; j < da.cols(); ++j) d(r0 + i, c0 + j) = -da(i, j);
            }
            QMatrix fm = induced_page_map(f, pa, pb, l + 1, q + 1);
            if (fm.rows() && fm.cols()) {
                std::size_t r0 = place(l + 1, q + 1, false), c0 = place(l, q, true);
                for (std::size_t i = 0; i < fm.rows(); ++i)
                    for (std::size_t j = 0; j < fm.cols(); ++j) d(r0 + i, c0 + j) = fm(i, j);
            }
        }
    e1.assign_total(d);
    auto e1_pages = compute_pages(FilteredComplex(e1), 2);
    out.cone_e2 = cone_pages[1].dims();
    out.cone_of_e1 = e1_pages[1].dims();
    return out;
}

} // namespace flowcat
