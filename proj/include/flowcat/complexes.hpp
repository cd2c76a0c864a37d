#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace flowcat {

struct Generator {
    std::string label;
    int degree = 0;

    bool operator==(const Generator& o) const { return label == o.label && degree == o.degree; }
};

using BlockKey = std::pair<int, int>;

struct BlockFailure {
    int s = 0;
    int k = 0;
    std::string detail;
};

using Report = std::vector<BlockFailure>;

inline std::string describe(const Report& r)
{
    std::string out;
    for (const auto& f : r) {
        if (!out.empty()) out += "; ";
        out += "(s=" + std::to_string(f.s) + ",k=" + std::to_string(f.k) + ")";
        if (!f.detail.empty()) out += " " + f.detail;
    }
    return out;
}

// A cochain complex split into integer levels. A block (s,k) is the component
// of the differential from level s to level s+k.
class GradedComplex {
public:
    std::map<int, std::vector<Generator>> levels;
    std::map<BlockKey, QMatrix> blocks;
    std::map<int, int> grading;

    void add_level(int index, std::vector<Generator> gens, std::optional<int> grade = std::nullopt)
    {
        levels[index] = std::move(gens);
        if (grade) grading[index] = *grade;
    }

    std::size_t size(int level) const
    {
        auto it = levels.find(level);
        return it == levels.end() ? 0 : it->second.size();
    }

    std::vector<int> level_indices() const
    {
        std::vector<int> out;
        for (const auto& [i, g] : levels) out.push_back(i);
        return out;
    }

    std::size_t total_size() const
    {
        std::size_t n = 0;
        for (const auto& [i, g] : levels) n += g.size();
        return n;
    }

    std::size_t offset(int level) const
    {
        std::size_t n = 0;
        for (const auto& [i, g] : levels) {
            if (i == level) return n;
            n += g.size();
        }
        throw ShapeMismatch("unknown level " + std::to_string(level));
    }

    std::vector<Generator> all_generators() const
    {
        std::vector<Generator> out;
        for (const auto& [i, g] : levels) out.insert(out.end(), g.begin(), g.end());
        return out;
    }

    std::vector<int> total_degrees() const
    {
        std::vector<int> out;
        for (const auto& [i, g] : levels)
            for (const auto& x : g) out.push_back(x.degree);
        return out;
    }

    std::vector<int> level_of_position() const
    {
        std::vector<int> out;
        for (const auto& [i, g] : levels) out.insert(out.end(), g.size(), i);
        return out;
    }

    QMatrix block(int s, int k) const
    {
        auto it = blocks.find({s, k});
        if (it != blocks.end()) return it->second;
        return QMatrix(size(s + k), size(s));
    }

    void set_block(int s, int k, QMatrix m)
    {
        if (m.rows() != size(s + k) || m.cols() != size(s))
            throw ShapeMismatch("block (" + std::to_string(s) + "," + std::to_string(k) + ") has shape " +
                                m.shape() + ", expected " + std::to_string(size(s + k)) + "x" +
                                std::to_string(size(s)));
        if (m.is_zero()) blocks.erase({s, k});
        else blocks[{s, k}] = std::move(m);
    }

    void check_shapes() const
    {
        for (const auto& [key, m] : blocks) {
            auto [s, k] = key;
            if (!levels.count(s) || !levels.count(s + k))
                throw ShapeMismatch("block (" + std::to_string(s) + "," + std::to_string(k) + ") refers to a missing level");
            if (m.rows() != size(s + k) || m.cols() != size(s))
                throw ShapeMismatch("block (" + std::to_string(s) + "," + std::to_string(k) + ") has shape " + m.shape());
        }
    }

    QMatrix total_differential() const
    {
        check_shapes();
        QMatrix d(total_size(), total_size());
        for (const auto& [key, m] : blocks) d.set_block(offset(key.first + key.second), offset(key.first), m);
        return d;
    }

    // Splits a total matrix back into level blocks, keeping nonzero ones.
    void assign_total(const QMatrix& d)
    {
        if (d.rows() != total_size() || d.cols() != total_size()) throw ShapeMismatch("total differential shape");
        blocks.clear();
        for (const auto& [s, gs] : levels)
            for (const auto& [t, gt] : levels) {
                QMatrix b = d.block(offset(t), offset(s), gt.size(), gs.size());
                if (!b.is_zero()) blocks[{s, t - s}] = b;
            }
    }

    int min_level() const { return levels.empty() ? 0 : levels.begin()->first; }
    int max_level() const { return levels.empty() ? 0 : levels.rbegin()->first; }
};

// Splits a map between two leveled spaces into nonzero (s,k) blocks.
inline std::map<BlockKey, QMatrix> split_blocks(const QMatrix& m, const GradedComplex& src, const GradedComplex& tgt)
{
    std::map<BlockKey, QMatrix> out;
    for (const auto& [s, gs] : src.levels)
        for (const auto& [t, gt] : tgt.levels) {
            QMatrix b = m.block(tgt.offset(t), src.offset(s), gt.size(), gs.size());
            if (!b.is_zero()) out[{s, t - s}] = b;
        }
    return out;
}

inline Report nonzero_blocks(const QMatrix& m, const GradedComplex& src, const GradedComplex& tgt)
{
    Report r;
    for (const auto& [key, b] : split_blocks(m, src, tgt)) r.push_back({key.first, key.second, ""});
    return r;
}

inline Report verify_d_squared(const GradedComplex& c)
{
    c.check_shapes();
    QMatrix d = c.total_differential();
    return nonzero_blocks(d * d, c, c);
}

// Every nonzero entry must raise the stored degree by exactly one.
inline Report verify_degrees(const GradedComplex& c)
{
    Report r;
    for (const auto& [key, m] : c.blocks) {
        const auto& gs = c.levels.at(key.first);
        const auto& gt = c.levels.at(key.first + key.second);
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j)
                if (m(i, j) != 0 && gt[i].degree != gs[j].degree + 1) {
                    r.push_back({key.first, key.second, gs[j].label + " -> " + gt[i].label});
                    goto next_block;
                }
    next_block:;
    }
    return r;
}

inline std::vector<std::size_t> positions_of_degree(const std::vector<int>& degrees, int q)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < degrees.size(); ++i)
        if (degrees[i] == q) out.push_back(i);
    return out;
}

inline std::set<int> degree_set(const GradedComplex& c)
{
    auto d = c.total_degrees();
    return {d.begin(), d.end()};
}

// Representatives for H^q together with a coordinate map for cocycles.
struct CohomologyBasis {
    int degree = 0;
    std::vector<std::size_t> positions;
    std::vector<QVector> reps;
    std::vector<QVector> boundaries;

    // Coordinates of a cocycle (given on `positions`) in terms of reps.
    QVector coordinates(const QVector& v) const
    {
        std::vector<QVector> cols = reps;
        cols.insert(cols.end(), boundaries.begin(), boundaries.end());
        if (cols.empty()) return {};
        auto x = solve(QMatrix::from_columns(v.size(), cols), v);
        if (!x) throw NotAComplex("vector is not a cocycle in degree " + std::to_string(degree));
        return QVector(x->begin(), x->begin() + static_cast<long>(reps.size()));
    }
};

inline void require_complex(const GradedComplex& c)
{
    auto r = verify_d_squared(c);
    if (!r.empty()) throw NotAComplex("d^2 != 0 at " + describe(r));
    auto g = verify_degrees(c);
    if (!g.empty()) throw NotAComplex("differential does not raise degree by one at " + describe(g));
}

inline CohomologyBasis cohomology_basis(const GradedComplex& c, int q, const QMatrix& d)
{
    CohomologyBasis cb;
    cb.degree = q;
    auto deg = c.total_degrees();
    cb.positions = positions_of_degree(deg, q);
    auto next = positions_of_degree(deg, q + 1);
    auto prev = positions_of_degree(deg, q - 1);
    auto cycles = kernel_basis(d.select(next, cb.positions));
    cb.boundaries = image_basis(d.select(cb.positions, prev));
    std::vector<QVector> acc = cb.boundaries;
    std::size_t r = span_rank(acc, cb.positions.size());
    for (const auto& z : cycles) {
        acc.push_back(z);
        std::size_t r2 = span_rank(acc, cb.positions.size());
        if (r2 > r) {
            cb.reps.push_back(z);
            r = r2;
        } else {
            acc.pop_back();
        }
    }
    return cb;
}

inline std::map<int, std::size_t> cohomology_betti(const GradedComplex& c)
{
    require_complex(c);
    QMatrix d = c.total_differential();
    auto deg = c.total_degrees();
    std::map<int, std::size_t> out;
    for (int q : degree_set(c)) {
        auto here = positions_of_degree(deg, q);
        auto next = positions_of_degree(deg, q + 1);
        auto prev = positions_of_degree(deg, q - 1);
        auto cycles = kernel_basis(d.select(next, here));
        auto bounds = image_basis(d.select(here, prev));
        std::size_t b = quotient_dimension(bounds, cycles);
        if (b) out[q] = b;
    }
    return out;
}

inline std::vector<std::size_t> betti_vector(const std::map<int, std::size_t>& betti, int lo, int hi)
{
    std::vector<std::size_t> v;
    for (int q = lo; q <= hi; ++q) {
        auto it = betti.find(q);
        v.push_back(it == betti.end() ? 0 : it->second);
    }
    return v;
}

inline long euler_characteristic(const std::map<int, std::size_t>& betti)
{
    long chi = 0;
    for (const auto& [q, b] : betti) chi += (q % 2 == 0 ? 1 : -1) * static_cast<long>(b);
    return chi;
}

struct ChainMap {
    GradedComplex source;
    GradedComplex target;
    std::map<BlockKey, QMatrix> blocks;
    int degree = 0;

    QMatrix block(int s, int k) const
    {
        auto it = blocks.find({s, k});
        if (it != blocks.end()) return it->second;
        return QMatrix(target.size(s + k), source.size(s));
    }

    void set_block(int s, int k, QMatrix m)
    {
        if (m.rows() != target.size(s + k) || m.cols() != source.size(s))
            throw ShapeMismatch("map block (" + std::to_string(s) + "," + std::to_string(k) + ") has shape " + m.shape());
        if (m.is_zero()) blocks.erase({s, k});
        else blocks[{s, k}] = std::move(m);
    }

    QMatrix total() const
    {
        QMatrix m(target.total_size(), source.total_size());
        for (const auto& [key, b] : blocks) {
            if (!source.levels.count(key.first) || !target.levels.count(key.first + key.second))
                throw ShapeMismatch("map block refers to a missing level");
            if (b.rows() != target.size(key.first + key.second) || b.cols() != source.size(key.first))
                throw ShapeMismatch("map block shape " + b.shape());
            m.set_block(target.offset(key.first + key.second), source.offset(key.first), b);
        }
        return m;
    }

    static ChainMap from_total(const GradedComplex& src, const GradedComplex& tgt, const QMatrix& m, int degree = 0)
    {
        if (m.rows() != tgt.total_size() || m.cols() != src.total_size()) throw ShapeMismatch("chain map total shape");
        ChainMap f{src, tgt, split_blocks(m, src, tgt), degree};
        return f;
    }

    static ChainMap identity(const GradedComplex& c)
    {
        return from_total(c, c, QMatrix::identity(c.total_size()));
    }

    int min_shift() const
    {
        int k = 0;
        for (const auto& [key, b] : blocks) k = std::min(k, key.second);
        return k;
    }
};

inline ChainMap compose(const ChainMap& g, const ChainMap& f)
{
    if (g.source.total_size() != f.target.total_size()) throw ShapeMismatch("composition of incompatible maps");
    return ChainMap::from_total(f.source, g.target, g.total() * f.total(), f.degree + g.degree);
}

inline Report verify_chain_map(const ChainMap& f)
{
    QMatrix ds = f.source.total_differential();
    QMatrix dt = f.target.total_differential();
    QMatrix m = f.total();
    int sign = (f.degree % 2 == 0) ? 1 : -1;
    QMatrix diff = m * ds - (dt * m).scaled(Rational(sign));
    return nonzero_blocks(diff, f.source, f.target);
}

// Satisfies d*lambda + lambda*d + f_map - h_map = 0 when verified.
struct Homotopy {
    ChainMap h_map;
    ChainMap f_map;
    std::map<BlockKey, QMatrix> blocks;

    QMatrix total() const
    {
        ChainMap tmp{h_map.source, h_map.target, blocks, -1};
        return tmp.total();
    }
};

inline Report verify_chain_homotopy(const Homotopy& h)
{
    const auto& src = h.h_map.source;
    const auto& tgt = h.h_map.target;
    if (h.f_map.source.total_size() != src.total_size() || h.f_map.target.total_size() != tgt.total_size())
        throw ShapeMismatch("homotopy endpoints differ in shape");
    QMatrix l = h.total();
    QMatrix lhs = tgt.total_differential() * l + l * src.total_differential() + h.f_map.total() - h.h_map.total();
    return nonzero_blocks(lhs, src, tgt);
}

inline Rational parity_sign(long e) { return Rational(sign_of_parity(e)); }

// Cone in degree q is target^q + source^(q+1); source level s sits at level s - shift.
inline GradedComplex mapping_cone(const ChainMap& f, int source_level_shift = 0)
{
    if (f.degree != 0) throw ShapeMismatch("mapping cone needs a degree-zero map");
    const auto& a = f.source;
    const auto& b = f.target;
    GradedComplex c;
    std::map<int, std::vector<std::pair<bool, std::size_t>>> origin;
    for (const auto& [t, gens] : b.levels) {
        for (std::size_t i = 0; i < gens.size(); ++i) {
            c.levels[t].push_back(gens[i]);
            origin[t].push_back({false, i});
        }
        if (b.grading.count(t)) c.grading[t] = b.grading.at(t);
    }
    for (const auto& [s, gens] : a.levels) {
        int l = s - source_level_shift;
        for (std::size_t i = 0; i < gens.size(); ++i) {
            c.levels[l].push_back({"cone(" + gens[i].label + ")", gens[i].degree - 1});
            origin[l].push_back({true, i});
        }
    }
    // Position maps from the original total orders into the cone's total order.
    std::vector<std::size_t> pos_b(b.total_size()), pos_a(a.total_size());
    std::size_t p = 0;
    for (const auto& [l, list] : origin)
        for (std::size_t i = 0; i < list.size(); ++i, ++p) {
            const auto& [is_source, idx] = list[i];
            if (is_source) {
                int s = l + source_level_shift;
                pos_a[a.offset(s) + idx] = p;
            } else {
                pos_b[b.offset(l) + idx] = p;
            }
        }
    QMatrix da = a.total_differential(), db = b.total_differential(), fm = f.total();
    QMatrix d(c.total_size(), c.total_size());
    for (std::size_t i = 0; i < db.rows(); ++i)
        for (std::size_t j = 0; j < db.cols(); ++j)
            if (db(i, j) != 0) d(pos_b[i], pos_b[j]) = db(i, j);
    for (std::size_t i = 0; i < fm.rows(); ++i)
        for (std::size_t j = 0; j < fm.cols(); ++j)
            if (fm(i, j) != 0) d(pos_b[i], pos_a[j]) = fm(i, j);
    for (std::size_t i = 0; i < da.rows(); ++i)
        for (std::size_t j = 0; j < da.cols(); ++j)
            if (da(i, j) != 0) d(pos_a[i], pos_a[j]) = -da(i, j);
    c.assign_total(d);
    return c;
}

// Degree p becomes p - n and the differential picks up (-1)^n.
inline GradedComplex suspend(const GradedComplex& c, int n)
{
    GradedComplex s = c;
    for (auto& [l, gens] : s.levels)
        for (auto& g : gens) g.degree -= n;
    if (n % 2 != 0)
        for (auto& [key, m] : s.blocks) m = -m;
    return s;
}

inline GradedComplex direct_sum_single_level(const std::vector<GradedComplex>& parts)
{
    GradedComplex out;
    std::vector<Generator> gens;
    std::size_t n = 0;
    for (const auto& p : parts) n += p.total_size();
    QMatrix d(n, n);
    std::size_t off = 0;
    for (std::size_t idx = 0; idx < parts.size(); ++idx) {
        for (auto g : parts[idx].all_generators()) {
            g.label = std::to_string(idx) + ":" + g.label;
            gens.push_back(g);
        }
        d.set_block(off, off, parts[idx].total_differential());
        off += parts[idx].total_size();
    }
    out.levels[0] = gens;
    out.assign_total(d);
    return out;
}

// Induced map on H^q between chosen cohomology bases (rows: target reps).
inline QMatrix induced_map_matrix(const ChainMap& f, int q)
{
    if (f.degree != 0) throw ShapeMismatch("induced map needs a degree-zero chain map");
    QMatrix ds = f.source.total_differential(), dt = f.target.total_differential();
    auto cs = cohomology_basis(f.source, q, ds);
    auto ct = cohomology_basis(f.target, q, dt);
    QMatrix m = f.total();
    auto tdeg = f.target.total_degrees();
    auto tpos = positions_of_degree(tdeg, q);
    QMatrix out(ct.reps.size(), cs.reps.size());
    for (std::size_t j = 0; j < cs.reps.size(); ++j) {
        QVector full(f.source.total_size(), Rational(0));
        for (std::size_t i = 0; i < cs.positions.size(); ++i) full[cs.positions[i]] = cs.reps[j][i];
        QVector img = m * full;
        QVector restricted;
        for (auto p : tpos) restricted.push_back(img[p]);
        auto coords = ct.coordinates(restricted);
        for (std::size_t i = 0; i < coords.size(); ++i) out(i, j) = coords[i];
    }
    return out;
}

inline std::size_t induced_rank(const ChainMap& f, int q) { return rank(induced_map_matrix(f, q)); }

inline std::set<int> joint_degrees(const ChainMap& f)
{
    auto a = degree_set(f.source);
    auto b = degree_set(f.target);
    a.insert(b.begin(), b.end());
    return a;
}

inline bool induces_isomorphism(const ChainMap& f)
{
    for (int q : joint_degrees(f)) {
        QMatrix m = induced_map_matrix(f, q);
        if (m.rows() != m.cols() || rank(m) != m.rows()) return false;
    }
    return true;
}

struct ShortExactReport {
    bool chain_maps = false;
    bool injective = false;
    bool surjective = false;
    bool composite_zero = false;
    bool middle_exact = false;
    std::size_t rank_in = 0;
    std::size_t rank_out = 0;
    std::size_t middle_dim = 0;

    bool exact() const { return chain_maps && injective && surjective && composite_zero && middle_exact; }
};

inline ShortExactReport short_exact_report(const ChainMap& i, const ChainMap& p)
{
    ShortExactReport r;
    r.chain_maps = verify_chain_map(i).empty() && verify_chain_map(p).empty();
    QMatrix mi = i.total(), mp = p.total();
    r.middle_dim = mi.rows();
    r.rank_in = rank(mi);
    r.rank_out = rank(mp);
    r.injective = r.rank_in == mi.cols();
    r.surjective = r.rank_out == mp.rows();
    r.composite_zero = (mp * mi).is_zero();
    r.middle_exact = r.composite_zero && (r.rank_in + r.rank_out == r.middle_dim);
    return r;
}

// Connecting map H^q(C) -> H^(q+1)(A) of 0 -> A -i-> B -p-> C -> 0, where the
// degree bookkeeping is taken from the complexes themselves.
inline QMatrix connecting_map(const ChainMap& i, const ChainMap& p, int q)
{
    const auto& a = i.source;
    const auto& b = i.target;
    const auto& c = p.target;
    QMatrix db = b.total_differential();
    QMatrix mi = i.total(), mp = p.total();
    auto cc = cohomology_basis(c, q, c.total_differential());
    auto ca = cohomology_basis(a, q + 1, a.total_differential());
    auto adeg = a.total_degrees();
    auto apos = positions_of_degree(adeg, q + 1);
    QMatrix out(ca.reps.size(), cc.reps.size());
    for (std::size_t j = 0; j < cc.reps.size(); ++j) {
        QVector z(c.total_size(), Rational(0));
        for (std::size_t t = 0; t < cc.positions.size(); ++t) z[cc.positions[t]] = cc.reps[j][t];
        auto lift = solve(mp, z);
        if (!lift) throw NotAChainMap("projection is not surjective");
        QVector dl = db * *lift;
        auto pre = solve(mi, dl);
        if (!pre) throw NotAChainMap("boundary of lift is not in the image of the inclusion");
        QVector restricted;
        for (auto pp : apos) restricted.push_back((*pre)[pp]);
        auto coords = ca.coordinates(restricted);
        for (std::size_t t = 0; t < coords.size(); ++t) out(t, j) = coords[t];
    }
    return out;
}

struct Tower {
    std::vector<GradedComplex> stages;
    // maps[n] : stages[n+1] -> stages[n]
    std::vector<ChainMap> maps;
    std::optional<ChainMap> tail;
};

struct HolimDegreeCheck {
    int degree = 0;
    std::size_t holim = 0;
    std::size_t lim = 0;
    std::size_t lim1_previous = 0;
    bool balanced = false;
};

struct HolimResult {
    GradedComplex complex;
    std::vector<HolimDegreeCheck> checks;

    bool balanced() const
    {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.balanced; });
    }
};

namespace detail {

// Subcomplex spanned by im(tau^m), m large enough for the image to stabilize.
inline std::pair<GradedComplex, QMatrix> stable_image(const GradedComplex& a, const QMatrix& tau)
{
    std::size_t n = a.total_size();
    QMatrix t = power(tau, n);
    auto deg = a.total_degrees();
    std::vector<QVector> basis;
    std::vector<Generator> gens;
    for (int q : degree_set(a)) {
        auto pos = positions_of_degree(deg, q);
        auto cols = image_basis(t.select(std::vector<std::size_t>(pos), pos));
        for (std::size_t j = 0; j < cols.size(); ++j) {
            QVector full(n, Rational(0));
            for (std::size_t i = 0; i < pos.size(); ++i) full[pos[i]] = cols[j][i];
            basis.push_back(full);
            gens.push_back({"inv" + std::to_string(gens.size()), q});
        }
    }
    QMatrix incl = QMatrix::from_columns(n, basis);
    QMatrix d = a.total_differential();
    QMatrix sub(basis.size(), basis.size());
    for (std::size_t j = 0; j < basis.size(); ++j) {
        if (basis.empty()) break;
        auto x = solve(incl, d * basis[j]);
        if (!x) throw NotAChainMap("stable image is not a subcomplex");
        for (std::size_t i = 0; i < basis.size(); ++i) sub(i, j) = (*x)[i];
    }
    GradedComplex s;
    s.levels[0] = gens;
    if (!basis.empty()) s.assign_total(sub);
    return {s, incl};
}

inline bool same_shape(const GradedComplex& a, const GradedComplex& b)
{
    return a.total_degrees() == b.total_degrees();
}

} // namespace detail

// Finite tower A_0 <- ... <- A_N continued forever by a tail map on A_N.
inline HolimResult homotopy_limit(const Tower& t)
{
    if (t.stages.empty()) throw EmptyTower("tower has no stages");
    if (t.maps.size() + 1 != t.stages.size()) throw ShapeMismatch("tower needs one map per consecutive pair");
    for (std::size_t n = 0; n < t.maps.size(); ++n) {
        if (t.maps[n].source.total_size() != t.stages[n + 1].total_size() ||
            t.maps[n].target.total_size() != t.stages[n].total_size())
            throw ShapeMismatch("tower map " + std::to_string(n) + " has wrong endpoints");
        auto r = verify_chain_map(t.maps[n]);
        if (!r.empty()) throw NotAChainMap("tower map " + std::to_string(n) + " at " + describe(r));
    }
    const std::size_t N = t.stages.size() - 1;
    const GradedComplex& last = t.stages[N];
    QMatrix tau = QMatrix::identity(last.total_size());
    if (t.tail) tau = t.tail->total();
    else if (N > 0 && detail::same_shape(t.stages[N], t.stages[N - 1])) tau = t.maps[N - 1].total();
    auto [inv, incl] = detail::stable_image(last, tau);

    std::vector<GradedComplex> src_parts(t.stages.begin(), t.stages.begin() + static_cast<long>(N));
    src_parts.push_back(inv);
    std::vector<GradedComplex> tgt_parts(t.stages.begin(), t.stages.begin() + static_cast<long>(N));
    GradedComplex src = direct_sum_single_level(src_parts);
    GradedComplex tgt = direct_sum_single_level(tgt_parts);

    QMatrix u(tgt.total_size(), src.total_size());
    std::vector<std::size_t> off(N + 2, 0);
    for (std::size_t n = 0; n <= N; ++n) off[n + 1] = off[n] + src_parts[n].total_size();
    for (std::size_t n = 0; n < N; ++n) {
        u.set_block(off[n], off[n], QMatrix::identity(t.stages[n].total_size()));
        QMatrix mu = t.maps[n].total();
        if (n + 1 == N) mu = mu * incl;
        u.set_block(off[n], off[n + 1], -mu);
    }
    ChainMap um = ChainMap::from_total(src, tgt, u);
    HolimResult res;
    res.complex = suspend(mapping_cone(um), -1);

    auto hol = cohomology_betti(res.complex);
    std::set<int> degs = joint_degrees(um);
    for (int q : degree_set(res.complex)) degs.insert(q);
    for (int q : degs) {
        HolimDegreeCheck c;
        c.degree = q;
        c.holim = hol.count(q) ? hol.at(q) : 0;
        QMatrix uq = induced_map_matrix(um, q);
        c.lim = uq.cols() - rank(uq);
        QMatrix up = induced_map_matrix(um, q - 1);
        c.lim1_previous = up.rows() - rank(up);
        c.balanced = c.holim == c.lim + c.lim1_previous;
        res.checks.push_back(c);
    }
    return res;
}

struct Twisted {
    GradedComplex complex;
    ChainMap rho;
};

// rho(alpha) = (-1)^{|alpha|(c_s+1)} with |alpha| the form degree at level s.
inline Twisted twist_differential(const GradedComplex& c, const std::map<int, int>& dims)
{
    std::vector<Rational> signs;
    for (const auto& [l, gens] : c.levels) {
        auto it = dims.find(l);
        if (it == dims.end()) throw MissingDimension("no manifold dimension for level " + std::to_string(l));
        int grade = c.grading.count(l) ? c.grading.at(l) : 0;
        for (const auto& g : gens) signs.push_back(parity_sign(static_cast<long>(g.degree - grade) * (it->second + 1)));
    }
    QMatrix rho(signs.size(), signs.size());
    for (std::size_t i = 0; i < signs.size(); ++i) rho(i, i) = signs[i];
    Twisted out;
    out.complex = c;
    out.complex.assign_total(rho * c.total_differential() * rho);
    out.rho = ChainMap::from_total(c, out.complex, rho);
    return out;
}

} // namespace flowcat
