#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "complexes.hpp"
#include "oracle.hpp"

namespace flowcat {

using DimTable = std::map<std::pair<int, int>, int>;

struct LevelSpec {
    int c = 0;
    std::optional<int> grading;
    // Generator degrees here are form degrees on the critical manifold.
    std::vector<Generator> gens;
    bool reduction = false;
};

struct FlowCategoryModel {
    std::string name;
    std::map<int, LevelSpec> levels;
    DimTable moduli;
    OraclePtr oracle = std::make_shared<ZeroOracle>();

    int c(int i) const
    {
        auto it = levels.find(i);
        if (it == levels.end()) throw MissingDimension("no level " + std::to_string(i) + " in " + name);
        return it->second.c;
    }

    std::optional<int> m(int i, int j) const
    {
        auto it = moduli.find({i, j});
        if (it == moduli.end()) return std::nullopt;
        return it->second;
    }

    bool graded() const
    {
        for (const auto& [i, l] : levels)
            if (!l.grading) return false;
        return true;
    }

    int grading(int i) const
    {
        const auto& l = levels.at(i);
        return l.grading.value_or(0);
    }

    std::vector<int> level_list() const
    {
        std::vector<int> out;
        for (const auto& [i, l] : levels) out.push_back(i);
        return out;
    }

    GradedComplex empty_complex() const
    {
        GradedComplex g;
        for (const auto& [i, l] : levels) {
            std::vector<Generator> gens;
            for (const auto& x : l.gens) gens.push_back({x.label, x.degree + grading(i)});
            g.levels[i] = gens;
            if (l.grading) g.grading[i] = *l.grading;
        }
        return g;
    }

    void validate() const
    {
        for (const auto& [key, d] : moduli) {
            if (!levels.count(key.first) || !levels.count(key.second))
                throw InvalidModel("moduli (" + std::to_string(key.first) + "," + std::to_string(key.second) + ") refer to a missing level");
            if (key.first >= key.second) throw InvalidModel("moduli must go from a lower to a higher level");
        }
        for (const auto& [ij, mij] : moduli)
            for (const auto& [jk, mjk] : moduli) {
                if (ij.second != jk.first) continue;
                auto mik = m(ij.first, jk.second);
                if (!mik) continue;
                if (mij + mjk - c(ij.second) + 1 != *mik)
                    throw InvalidModel("dimension relation fails for levels " + std::to_string(ij.first) + "," +
                                       std::to_string(ij.second) + "," + std::to_string(jk.second));
            }
        if (graded())
            for (const auto& [ij, mij] : moduli)
                if (grading(ij.first) != grading(ij.second) + c(ij.second) - mij - 1)
                    throw InvalidModel("grading relation fails for levels " + std::to_string(ij.first) + "," + std::to_string(ij.second));
    }

    std::map<int, int> dims() const
    {
        std::map<int, int> out;
        for (const auto& [i, l] : levels) out[i] = l.c;
        return out;
    }
};

struct FlowMorphismModel {
    FlowCategoryModel source;
    FlowCategoryModel target;
    DimTable dims;
    int cutoff = 0;
    OraclePtr oracle = std::make_shared<ZeroOracle>();

    std::optional<int> h(int i, int j) const
    {
        auto it = dims.find({i, j});
        if (it == dims.end()) return std::nullopt;
        return it->second;
    }

    void validate() const
    {
        for (const auto& [ij, hij] : dims) {
            if (!source.levels.count(ij.first) || !target.levels.count(ij.second))
                throw InvalidModel("morphism space refers to a missing level");
            if (ij.first - ij.second > cutoff) throw InvalidModel("morphism space beyond the cutoff");
        }
        for (const auto& [ij, hij] : dims) {
            for (const auto& [jk, mjk] : target.moduli) {
                if (jk.first != ij.second) continue;
                auto hik = h(ij.first, jk.second);
                if (hik && hij + mjk - target.c(ij.second) + 1 != *hik)
                    throw InvalidModel("morphism dimension relation (target side) fails");
            }
            for (const auto& [ki, mki] : source.moduli) {
                if (ki.second != ij.first) continue;
                auto hkj = h(ki.first, ij.second);
                if (hkj && mki + hij - source.c(ij.first) + 1 != *hkj)
                    throw InvalidModel("morphism dimension relation (source side) fails");
            }
            if (source.graded() && target.graded() &&
                source.grading(ij.first) != target.grading(ij.second) + target.c(ij.second) - hij)
                throw InvalidModel("morphism does not preserve the grading at (" + std::to_string(ij.first) + "," +
                                   std::to_string(ij.second) + ")");
        }
    }
};

struct FlowHomotopyModel {
    FlowMorphismModel f;
    FlowMorphismModel h;
    DimTable dims;
    int cutoff = 0;
    OraclePtr oracle = std::make_shared<ZeroOracle>();

    std::optional<int> k(int i, int j) const
    {
        auto it = dims.find({i, j});
        if (it == dims.end()) return std::nullopt;
        return it->second;
    }
};

// H : C -> D, F : D -> E and the composite F∘H : C -> E with its own pairings.
struct CompositionModel {
    FlowMorphismModel h;
    FlowMorphismModel f;
    FlowMorphismModel fh;
    OraclePtr mixed = std::make_shared<ZeroOracle>();
};

struct SignContext {
    const FlowCategoryModel& fc;

    int dagger_exponent(int alpha_degree, int s, int k) const
    {
        auto m = fc.m(s, s + k);
        if (!m) throw MissingDimension("m_{" + std::to_string(s) + "," + std::to_string(s + k) + "} is not defined");
        return (alpha_degree + *m) * (fc.c(s + k) + 1);
    }

    int ddagger_exponent(int alpha_degree, int s, int k) const
    {
        auto m = fc.m(s, s + k);
        if (!m) throw MissingDimension("m_{" + std::to_string(s) + "," + std::to_string(s + k) + "} is not defined");
        return (alpha_degree + *m + 1) * (fc.c(s + k) + 1);
    }
};

inline int sign_dagger(const SignContext& ctx, int alpha_degree, int s, int k)
{
    return sign_of_parity(ctx.dagger_exponent(alpha_degree, s, k));
}

inline int sign_ddagger(const SignContext& ctx, int alpha_degree, int s, int k)
{
    return sign_of_parity(ctx.ddagger_exponent(alpha_degree, s, k));
}

struct SignTrace {
    std::vector<std::string> lines;
    void add(std::string s) { lines.push_back(std::move(s)); }
};

namespace detail {

// All strictly increasing level chains from `from` to `to` through `levels`.
inline std::vector<std::vector<int>> chains(const std::vector<int>& levels, int from, int to)
{
    if (from == to) return {{from}};
    if (from > to) return {};
    std::vector<int> mid;
    for (int l : levels)
        if (l > from && l < to) mid.push_back(l);
    std::vector<std::vector<int>> out;
    const std::size_t n = mid.size();
    for (std::size_t mask = 0; mask < (std::size_t(1) << n); ++mask) {
        std::vector<int> ch{from};
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t(1) << i)) ch.push_back(mid[i]);
        ch.push_back(to);
        out.push_back(ch);
    }
    return out;
}

// Formal dimension of the broken chain l0 < ... < lp in one category; a chain
// of length zero has the conventional value c - 1.
inline std::optional<int> chain_dim(const FlowCategoryModel& fc, const std::vector<int>& ch)
{
    if (ch.size() == 1) return fc.c(ch[0]) - 1;
    int total = 0;
    for (std::size_t i = 0; i + 1 < ch.size(); ++i) {
        auto m = fc.m(ch[i], ch[i + 1]);
        if (!m) return std::nullopt;
        total += *m;
        if (i > 0) total -= fc.c(ch[i]);
    }
    return total + static_cast<int>(ch.size()) - 2;
}

inline std::string chain_text(const std::vector<Segment>& segs)
{
    std::string s;
    for (const auto& g : segs) {
        if (!s.empty()) s += " ";
        s += std::string(1, g.space) + "(" + std::to_string(g.from) + "->" + std::to_string(g.to) + ")";
    }
    return s;
}

inline Rational exact_value(const PairingOracle& o, const PairingQuery& q)
{
    PairingValue v = o.query(q);
    if (!v.is_exact) throw NotConverged("pairing " + q.key() + " has no exact value (approx " + std::to_string(v.approx) + ")");
    return v.exact;
}

// A product chain: C-chain, one middle space, D-chain (and optionally a second
// middle space followed by an E-chain, for compositions).
struct MixedChain {
    std::vector<int> cchain;
    std::vector<int> dchain;
    std::vector<int> echain;
};

} // namespace detail

inline GradedComplex assemble_differential(const FlowCategoryModel& fc, SignTrace* trace = nullptr)
{
    fc.validate();
    GradedComplex out = fc.empty_complex();
    auto lv = fc.level_list();
    for (int s : lv) {
        const auto& ls = fc.levels.at(s);
        if (ls.reduction) {
            QMatrix blk(ls.gens.size(), ls.gens.size());
            for (std::size_t a = 0; a < ls.gens.size(); ++a)
                for (std::size_t b = 0; b < ls.gens.size(); ++b) {
                    if (ls.gens[b].degree != ls.gens[a].degree + 1) continue;
                    PairingQuery q;
                    q.kind = PairingKind::reduction;
                    q.level = s;
                    q.a = a;
                    q.b = b;
                    q.alpha_degree = ls.gens[a].degree;
                    q.gamma_degree = ls.gens[b].degree;
                    Rational raw = detail::exact_value(*fc.oracle, q);
                    if (raw == 0) continue;
                    int e = ls.gens[a].degree * (ls.c + 1) + ls.c;
                    blk(b, a) += parity_sign(e) * raw;
                    if (trace)
                        trace->add("d s=" + std::to_string(s) + " k=0 a=" + ls.gens[a].label + " b=" + ls.gens[b].label +
                                   " reduction exponent=" + std::to_string(e) + " raw=" + raw.get_str());
                }
            out.set_block(s, 0, blk);
        }
        for (int t : lv) {
            if (t <= s) continue;
            const auto& lt = fc.levels.at(t);
            QMatrix blk(lt.gens.size(), ls.gens.size());
            for (const auto& ch : detail::chains(lv, s, t)) {
                std::vector<Segment> segs;
                std::vector<int> jd;
                int cdim = 0;
                bool ok = true;
                for (std::size_t i = 0; i + 1 < ch.size(); ++i) {
                    auto m = fc.m(ch[i], ch[i + 1]);
                    if (!m) { ok = false; break; }
                    segs.push_back({'C', ch[i], ch[i + 1]});
                    cdim += *m;
                    if (i > 0) jd.push_back(fc.c(ch[i]));
                }
                if (!ok) continue;
                for (std::size_t a = 0; a < ls.gens.size(); ++a)
                    for (std::size_t b = 0; b < lt.gens.size(); ++b) {
                        PairingQuery q;
                        q.kind = PairingKind::category;
                        q.segments = segs;
                        q.a = a;
                        q.b = b;
                        q.junction_dims = jd;
                        q.chain_dim = cdim;
                        q.alpha_degree = ls.gens[a].degree;
                        q.gamma_degree = lt.gens[b].degree;
                        q.integrand_degree = ls.gens[a].degree + (lt.c - lt.gens[b].degree);
                        for (int c : jd) q.integrand_degree += c - 1;
                        if (vanishes_by_degree(q)) continue;
                        Rational raw = detail::exact_value(*fc.oracle, q);
                        if (raw == 0) continue;
                        const int al = ls.gens[a].degree;
                        int e = al * (ls.c + 1);
                        std::string parts = std::to_string(e);
                        for (std::size_t w = 1; w + 1 < ch.size(); ++w) {
                            std::vector<int> prefix(ch.begin(), ch.begin() + static_cast<long>(w) + 1);
                            int mpre = *detail::chain_dim(fc, prefix);
                            int dd = (al + mpre + 1) * (fc.c(ch[w]) + 1);
                            e += dd;
                            parts += "+" + std::to_string(dd);
                        }
                        blk(b, a) += parity_sign(e) * raw;
                        if (trace)
                            trace->add("d s=" + std::to_string(s) + " k=" + std::to_string(t - s) + " a=" + ls.gens[a].label +
                                       " b=" + lt.gens[b].label + " chain=" + detail::chain_text(segs) + " exponent=" + parts +
                                       " raw=" + raw.get_str());
                    }
            }
            out.set_block(s, t - s, blk);
        }
    }
    return out;
}

namespace detail {

struct MiddleSpace {
    char space;
    const DimTable* dims;
};

inline std::optional<int> table_dim(const DimTable& t, int i, int j)
{
    auto it = t.find({i, j});
    if (it == t.end()) return std::nullopt;
    return it->second;
}

// Formal dimension of C-chain, middle space, then a prefix of the D-chain.
inline int through_dim(const FlowCategoryModel& src, const FlowCategoryModel& tgt, const DimTable& mid,
                       const std::vector<int>& cch, const std::vector<int>& dprefix)
{
    int v = *chain_dim(src, cch) + *table_dim(mid, cch.back(), dprefix.front()) - src.c(cch.back()) + 1;
    for (std::size_t i = 0; i + 1 < dprefix.size(); ++i) v += *tgt.m(dprefix[i], dprefix[i + 1]) - tgt.c(dprefix[i]) + 1;
    return v;
}

inline bool chain_present(const FlowCategoryModel& fc, const std::vector<int>& ch)
{
    for (std::size_t i = 0; i + 1 < ch.size(); ++i)
        if (!fc.m(ch[i], ch[i + 1])) return false;
    return true;
}

struct Piece {
    std::vector<Segment> segs;
    std::vector<int> junction_dims;
    int chain_dim = 0;
};

// Segments and junction kernels for C-chain, middle, D-chain; every interior
// meeting point carries a kernel of the category it lies in.
inline Piece build_piece(const FlowCategoryModel& src, const FlowCategoryModel& tgt, char mid_space, int mid_dim,
                         const std::vector<int>& cch, const std::vector<int>& dch)
{
    Piece p;
    for (std::size_t i = 0; i + 1 < cch.size(); ++i) {
        p.segs.push_back({'C', cch[i], cch[i + 1]});
        p.chain_dim += *src.m(cch[i], cch[i + 1]);
        p.junction_dims.push_back(src.c(cch[i + 1]));
    }
    p.segs.push_back({mid_space, cch.back(), dch.front()});
    p.chain_dim += mid_dim;
    for (std::size_t i = 0; i + 1 < dch.size(); ++i) {
        p.junction_dims.push_back(tgt.c(dch[i]));
        p.segs.push_back({'D', dch[i], dch[i + 1]});
        p.chain_dim += *tgt.m(dch[i], dch[i + 1]);
    }
    return p;
}

using ExponentFn = std::function<int(int alpha_degree, std::string& parts)>;

inline void accumulate(std::map<BlockKey, QMatrix>& blocks, const GradedComplex& src, const GradedComplex& tgt, int s, int t,
                       const FlowCategoryModel& fsrc, const FlowCategoryModel& ftgt, PairingKind kind, const Piece& piece,
                       const PairingOracle& oracle, const ExponentFn& exponent, SignTrace* trace, const char* tag)
{
    const auto& ls = fsrc.levels.at(s);
    const auto& lt = ftgt.levels.at(t);
    auto key = BlockKey{s, t - s};
    for (std::size_t a = 0; a < ls.gens.size(); ++a)
        for (std::size_t b = 0; b < lt.gens.size(); ++b) {
            PairingQuery q;
            q.kind = kind;
            q.segments = piece.segs;
            q.a = a;
            q.b = b;
            q.junction_dims = piece.junction_dims;
            q.chain_dim = piece.chain_dim;
            q.alpha_degree = ls.gens[a].degree;
            q.gamma_degree = lt.gens[b].degree;
            q.integrand_degree = ls.gens[a].degree + (lt.c - lt.gens[b].degree);
            for (int c : piece.junction_dims) q.integrand_degree += c - 1;
            if (vanishes_by_degree(q)) continue;
            Rational raw = exact_value(oracle, q);
            if (raw == 0) continue;
            std::string parts;
            int e = exponent(ls.gens[a].degree, parts);
            auto it = blocks.find(key);
            if (it == blocks.end()) it = blocks.emplace(key, QMatrix(tgt.size(t), src.size(s))).first;
            it->second(b, a) += parity_sign(e) * raw;
            if (trace)
                trace->add(std::string(tag) + " s=" + std::to_string(s) + " k=" + std::to_string(t - s) + " a=" +
                           ls.gens[a].label + " b=" + lt.gens[b].label + " chain=" + chain_text(piece.segs) +
                           " exponent=" + parts + " raw=" + raw.get_str());
        }
}

inline void prune(std::map<BlockKey, QMatrix>& blocks)
{
    for (auto it = blocks.begin(); it != blocks.end();)
        if (it->second.is_zero()) it = blocks.erase(it);
        else ++it;
}

inline std::string plus(std::string& parts, int v)
{
    if (!parts.empty()) parts += "+";
    parts += std::to_string(v);
    return parts;
}

} // namespace detail

inline ChainMap assemble_morphism_map(const FlowMorphismModel& fm, const GradedComplex& src, const GradedComplex& tgt,
                                      SignTrace* trace = nullptr)
{
    fm.validate();
    const auto& C = fm.source;
    const auto& D = fm.target;
    auto cl = C.level_list();
    auto dl = D.level_list();
    std::map<BlockKey, QMatrix> blocks;
    for (int s : cl)
        for (int t : dl) {
            if (s - t > fm.cutoff) continue;
            for (int xp : cl) {
                if (xp < s) continue;
                for (const auto& cch : detail::chains(cl, s, xp)) {
                    if (!detail::chain_present(C, cch)) continue;
                    for (int y0 : dl) {
                        if (y0 > t) continue;
                        auto hm = fm.h(xp, y0);
                        if (!hm) continue;
                        for (const auto& dch : detail::chains(dl, y0, t)) {
                            if (!detail::chain_present(D, dch)) continue;
                            auto piece = detail::build_piece(C, D, 'H', *hm, cch, dch);
                            auto exponent = [&](int al, std::string& parts) {
                                int hst = detail::through_dim(C, D, fm.dims, cch, dch);
                                int e = al * C.c(s) + hst;
                                detail::plus(parts, e);
                                for (std::size_t w = 1; w < cch.size(); ++w) {
                                    std::vector<int> pre(cch.begin(), cch.begin() + static_cast<long>(w) + 1);
                                    int v = (al + *detail::chain_dim(C, pre) + 1) * (C.c(cch[w]) + 1);
                                    e += v;
                                    detail::plus(parts, v);
                                }
                                for (std::size_t w = 0; w + 1 < dch.size(); ++w) {
                                    std::vector<int> pre(dch.begin(), dch.begin() + static_cast<long>(w) + 1);
                                    int hd = detail::through_dim(C, D, fm.dims, cch, pre);
                                    int v = (al + hd + 1) * (D.c(dch[w]) + 1);
                                    e += v;
                                    detail::plus(parts, v);
                                }
                                int tail = D.c(dch.front()) + 1 + *detail::chain_dim(D, dch);
                                e += tail;
                                detail::plus(parts, tail);
                                return e;
                            };
                            detail::accumulate(blocks, src, tgt, s, t, C, D, PairingKind::morphism, piece, *fm.oracle, exponent,
                                               trace, "phi");
                        }
                    }
                }
            }
        }
    detail::prune(blocks);
    return ChainMap{src, tgt, blocks, 0};
}

inline ChainMap assemble_morphism_map(const FlowMorphismModel& fm, SignTrace* trace = nullptr)
{
    return assemble_morphism_map(fm, assemble_differential(fm.source), assemble_differential(fm.target), trace);
}

inline Homotopy assemble_homotopy_operator(const FlowHomotopyModel& km, SignTrace* trace = nullptr)
{
    const auto& C = km.f.source;
    const auto& D = km.f.target;
    GradedComplex src = assemble_differential(C);
    GradedComplex tgt = assemble_differential(D);
    Homotopy out{assemble_morphism_map(km.h, src, tgt), assemble_morphism_map(km.f, src, tgt), {}};
    auto cl = C.level_list();
    auto dl = D.level_list();
    for (int s : cl)
        for (int t : dl) {
            if (s - t > km.cutoff) continue;
            for (int xp : cl) {
                if (xp < s) continue;
                for (const auto& cch : detail::chains(cl, s, xp)) {
                    if (!detail::chain_present(C, cch)) continue;
                    for (int y0 : dl) {
                        if (y0 > t) continue;
                        auto kd = km.k(xp, y0);
                        if (!kd) continue;
                        for (const auto& dch : detail::chains(dl, y0, t)) {
                            if (!detail::chain_present(D, dch)) continue;
                            auto piece = detail::build_piece(C, D, 'K', *kd, cch, dch);
                            auto exponent = [&](int al, std::string& parts) {
                                int kst = detail::through_dim(C, D, km.dims, cch, dch);
                                int e = al * (C.c(s) + 1) + kst;
                                detail::plus(parts, e);
                                for (std::size_t w = 1; w < cch.size(); ++w) {
                                    std::vector<int> pre(cch.begin(), cch.begin() + static_cast<long>(w) + 1);
                                    int v = (al + *detail::chain_dim(C, pre) + 1) * (C.c(cch[w]) + 1);
                                    e += v;
                                    detail::plus(parts, v);
                                }
                                int mid = C.c(cch.back()) + *detail::chain_dim(C, cch) + 1;
                                e += mid;
                                detail::plus(parts, mid);
                                for (std::size_t w = 0; w + 1 < dch.size(); ++w) {
                                    std::vector<int> pre(dch.begin(), dch.begin() + static_cast<long>(w) + 1);
                                    int kd2 = detail::through_dim(C, D, km.dims, cch, pre);
                                    int v = (al + kd2 + 1) * (D.c(dch[w]) + 1);
                                    e += v;
                                    detail::plus(parts, v);
                                }
                                int tail = D.c(dch.front()) + *detail::chain_dim(D, dch) + 1;
                                e += tail;
                                detail::plus(parts, tail);
                                return e;
                            };
                            detail::accumulate(out.blocks, src, tgt, s, t, C, D, PairingKind::homotopy, piece, *km.oracle,
                                               exponent, trace, "lambda");
                        }
                    }
                }
            }
        }
    detail::prune(out.blocks);
    return out;
}

inline Homotopy assemble_composition_homotopy(const CompositionModel& cm, SignTrace* trace = nullptr)
{
    const auto& C = cm.h.source;
    const auto& D = cm.h.target;
    const auto& E = cm.f.target;
    if (cm.f.source.level_list() != D.level_list() || cm.fh.source.level_list() != C.level_list() ||
        cm.fh.target.level_list() != E.level_list())
        throw NotComposable("morphism endpoints do not line up");
    if (!cm.mixed) throw NotComposable("no mixed pairings supplied");
    GradedComplex gc = assemble_differential(C);
    GradedComplex gd = assemble_differential(D);
    GradedComplex ge = assemble_differential(E);
    ChainMap ph = assemble_morphism_map(cm.h, gc, gd);
    ChainMap pf = assemble_morphism_map(cm.f, gd, ge);
    ChainMap pfh = assemble_morphism_map(cm.fh, gc, ge);
    Homotopy out{compose(pf, ph), pfh, {}};
    out.h_map.source = gc;
    out.h_map.target = ge;

    auto cl = C.level_list();
    auto dl = D.level_list();
    auto el = E.level_list();
    const int reach = cm.h.cutoff + cm.f.cutoff;
    for (int s : cl)
        for (int t : el) {
            if (s - t > reach) continue;
            for (int xp : cl) {
                if (xp < s) continue;
                for (const auto& cch : detail::chains(cl, s, xp)) {
                    if (!detail::chain_present(C, cch)) continue;
                    for (int y0 : dl) {
                        auto hd = cm.h.h(xp, y0);
                        if (!hd) continue;
                        for (int yq : dl) {
                            if (yq < y0) continue;
                            for (const auto& dch : detail::chains(dl, y0, yq)) {
                                if (!detail::chain_present(D, dch)) continue;
                                for (int z0 : el) {
                                    if (z0 > t) continue;
                                    auto fd = cm.f.h(yq, z0);
                                    if (!fd) continue;
                                    for (const auto& ech : detail::chains(el, z0, t)) {
                                        if (!detail::chain_present(E, ech)) continue;
                                        detail::Piece piece;
                                        for (std::size_t i = 0; i + 1 < cch.size(); ++i) {
                                            piece.segs.push_back({'C', cch[i], cch[i + 1]});
                                            piece.chain_dim += *C.m(cch[i], cch[i + 1]);
                                            piece.junction_dims.push_back(C.c(cch[i + 1]));
                                        }
                                        piece.segs.push_back({'H', xp, y0});
                                        piece.chain_dim += *hd;
                                        for (std::size_t i = 0; i < dch.size(); ++i) {
                                            piece.junction_dims.push_back(D.c(dch[i]));
                                            if (i + 1 < dch.size()) {
                                                piece.segs.push_back({'D', dch[i], dch[i + 1]});
                                                piece.chain_dim += *D.m(dch[i], dch[i + 1]);
                                            }
                                        }
                                        piece.segs.push_back({'F', yq, z0});
                                        piece.chain_dim += *fd;
                                        for (std::size_t i = 0; i + 1 < ech.size(); ++i) {
                                            piece.junction_dims.push_back(E.c(ech[i]));
                                            piece.segs.push_back({'E', ech[i], ech[i + 1]});
                                            piece.chain_dim += *E.m(ech[i], ech[i + 1]);
                                        }
                                        auto exponent = [&](int al, std::string& parts) {
                                            int hq = detail::through_dim(C, D, cm.h.dims, cch, dch);
                                            auto fh_to = [&](std::size_t upto) {
                                                int v = hq + *fd - D.c(yq);
                                                for (std::size_t i = 0; i < upto; ++i)
                                                    v += *E.m(ech[i], ech[i + 1]) - E.c(ech[i]) + 1;
                                                return v;
                                            };
                                            int e = al * (C.c(s) + 1) + fh_to(ech.size() - 1) + 1;
                                            detail::plus(parts, e);
                                            for (std::size_t w = 1; w < cch.size(); ++w) {
                                                std::vector<int> pre(cch.begin(), cch.begin() + static_cast<long>(w) + 1);
                                                int v = (al + *detail::chain_dim(C, pre) + 1) * (C.c(cch[w]) + 1);
                                                e += v;
                                                detail::plus(parts, v);
                                            }
                                            int h1 = detail::through_dim(C, D, cm.h.dims, cch, {y0});
                                            e += h1;
                                            detail::plus(parts, h1);
                                            for (std::size_t w = 0; w < dch.size(); ++w) {
                                                std::vector<int> pre(dch.begin(), dch.begin() + static_cast<long>(w) + 1);
                                                int v = (al + detail::through_dim(C, D, cm.h.dims, cch, pre) + 1) * (D.c(dch[w]) + 1);
                                                e += v;
                                                detail::plus(parts, v);
                                            }
                                            for (std::size_t w = 0; w + 1 < ech.size(); ++w) {
                                                int v = (al + fh_to(w)) * (E.c(ech[w]) + 1);
                                                e += v;
                                                detail::plus(parts, v);
                                            }
                                            int tail = E.c(z0) + *detail::chain_dim(E, ech) + 1;
                                            e += tail;
                                            detail::plus(parts, tail);
                                            return e;
                                        };
                                        detail::accumulate(out.blocks, gc, ge, s, t, C, E, PairingKind::mixed, piece, *cm.mixed,
                                                           exponent, trace, "P");
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    detail::prune(out.blocks);
    return out;
}

// Every nonzero entry of d_k must satisfy the parity identity
// (|a| + m)(c_t + 1) = |b|(c_t + 1) mod 2 for graded models.
inline Report verify_parity(const FlowCategoryModel& fc, const GradedComplex& c)
{
    Report r;
    if (!fc.graded()) return r;
    for (const auto& [key, m] : c.blocks) {
        auto [s, k] = key;
        if (k == 0) continue;
        auto md = fc.m(s, s + k);
        if (!md) continue;
        const auto& gs = fc.levels.at(s).gens;
        const auto& gt = fc.levels.at(s + k).gens;
        int ct = fc.c(s + k);
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j)
                if (m(i, j) != 0 && ((gs[j].degree + *md) * (ct + 1) - gt[i].degree * (ct + 1)) % 2 != 0)
                    r.push_back({s, k, gs[j].label + " -> " + gt[i].label});
    }
    return r;
}

// Pairings of the identity morphism: spaces carrying an interval factor of
// positive length integrate to zero, and the diagonal pairing is dual to the basis.
class IdentityOracle : public PairingOracle {
public:
    explicit IdentityOracle(std::map<int, LevelSpec> levels) : levels_(std::move(levels)) {}

    PairingValue query(const PairingQuery& q) const override
    {
        if (vanishes_by_degree(q)) return PairingValue::zero();
        if (q.kind != PairingKind::morphism) return PairingValue::zero();
        for (const auto& sg : q.segments)
            if (sg.space == 'H' && sg.from != sg.to) return PairingValue::zero();
        if (q.segments.size() == 1) {
            const auto& seg = q.segments[0];
            if (q.a != q.b) return PairingValue::zero();
            int c = levels_.at(seg.from).c;
            int al = levels_.at(seg.from).gens.at(q.a).degree;
            return PairingValue::of(parity_sign(static_cast<long>(c) * (c + al)));
        }
        throw OracleMissingPairing("identity morphism pairing " + q.key() + " needs kernel data on a diagonal");
    }

    std::string name() const override { return "identity"; }

private:
    std::map<int, LevelSpec> levels_;
};

// Morphism between two models that share level data on the levels they have
// in common, built from the diagonal and interval spaces.
inline FlowMorphismModel identity_type_morphism(const FlowCategoryModel& src, const FlowCategoryModel& tgt)
{
    FlowMorphismModel fm;
    fm.source = src;
    fm.target = tgt;
    fm.cutoff = 0;
    std::map<int, LevelSpec> shared;
    for (const auto& [i, l] : src.levels)
        if (tgt.levels.count(i)) {
            shared[i] = l;
            fm.dims[{i, i}] = l.c;
        }
    for (const auto& [i, ls] : src.levels)
        for (const auto& [j, lt] : tgt.levels) {
            if (j <= i) continue;
            auto m = src.levels.count(j) ? src.m(i, j) : std::nullopt;
            if (!m && tgt.levels.count(i)) m = tgt.m(i, j);
            if (m) fm.dims[{i, j}] = *m + 1;
        }
    fm.oracle = std::make_shared<IdentityOracle>(shared);
    return fm;
}

inline FlowMorphismModel identity_morphism(const FlowCategoryModel& fc) { return identity_type_morphism(fc, fc); }

inline ChainMap neumann_inverse(const ChainMap& f)
{
    if (f.source.total_size() != f.target.total_size()) throw NotUnitriangular("map is not square");
    for (const auto& [key, m] : f.blocks)
        if (key.second < 0) throw NotUnitriangular("block (" + std::to_string(key.first) + "," + std::to_string(key.second) + ") lowers the level");
    for (const auto& [l, g] : f.source.levels) {
        if (f.block(l, 0) != QMatrix::identity(g.size()))
            throw NotUnitriangular("diagonal block at level " + std::to_string(l) + " is not the identity");
    }
    const std::size_t n = f.source.total_size();
    QMatrix nm = f.total() - QMatrix::identity(n);
    QMatrix term = QMatrix::identity(n);
    QMatrix sum = term;
    for (std::size_t i = 0; i <= n; ++i) {
        term = -(term * nm);
        if (term.is_zero()) break;
        sum = sum + term;
    }
    return ChainMap::from_total(f.target, f.source, sum);
}

inline bool is_unitriangular(const ChainMap& f)
{
    try {
        neumann_inverse(f);
        return true;
    } catch (const NotUnitriangular&) {
        return false;
    }
}

struct SubquotientSplit {
    FlowCategoryModel sub;
    FlowCategoryModel quotient;
    FlowMorphismModel inclusion;
    FlowMorphismModel projection;
};

inline FlowCategoryModel restrict_levels(const FlowCategoryModel& fc, const std::set<int>& keep, const std::string& name)
{
    FlowCategoryModel out;
    out.name = name;
    out.oracle = fc.oracle;
    for (const auto& [i, l] : fc.levels)
        if (keep.count(i)) out.levels[i] = l;
    for (const auto& [ij, d] : fc.moduli)
        if (keep.count(ij.first) && keep.count(ij.second)) out.moduli[ij] = d;
    return out;
}

inline SubquotientSplit subquotient_split(const FlowCategoryModel& fc, const std::set<int>& A)
{
    for (int i : A)
        if (!fc.levels.count(i)) throw NotASubset("level " + std::to_string(i) + " is not in the model");
    for (const auto& [ij, d] : fc.moduli)
        if (A.count(ij.first) && !A.count(ij.second))
            throw NotASubset("moduli from " + std::to_string(ij.first) + " in A to " + std::to_string(ij.second) + " outside A");
    std::set<int> rest;
    for (const auto& [i, l] : fc.levels)
        if (!A.count(i)) rest.insert(i);
    SubquotientSplit out;
    out.sub = restrict_levels(fc, A, fc.name + "/sub");
    out.quotient = restrict_levels(fc, rest, fc.name + "/quotient");
    out.inclusion = identity_type_morphism(out.sub, fc);
    out.projection = identity_type_morphism(fc, out.quotient);
    return out;
}

// Closed manifold factor B: a graded basis of H*(B), with the pairing
// against duals and the pairing of the kernel of B between basis elements.
struct ManifoldFactor {
    std::string name;
    int dim = 0;
    std::vector<Generator> basis;
    std::optional<QMatrix> kernel_factor;
};

namespace detail {

inline int category_prefactor(const FlowCategoryModel& fc, int s, const std::vector<int>& ch, int al)
{
    int e = al * (fc.c(s) + 1);
    for (std::size_t w = 1; w + 1 < ch.size(); ++w) {
        std::vector<int> pre(ch.begin(), ch.begin() + static_cast<long>(w) + 1);
        e += (al + *chain_dim(fc, pre) + 1) * (fc.c(ch[w]) + 1);
    }
    return e;
}

inline std::vector<int> levels_of(const std::vector<Segment>& segs)
{
    std::vector<int> ch{segs.front().from};
    for (const auto& s : segs) ch.push_back(s.to);
    return ch;
}

} // namespace detail

// Pairings of C x B factored through the base pairing and the pairing on B.
// Values are normalized so the assembled product differential is d ⊗ id.
class ProductOracle : public PairingOracle {
public:
    ProductOracle(FlowCategoryModel base, FlowCategoryModel product, ManifoldFactor b)
        : base_(std::move(base)), product_(std::move(product)), b_(std::move(b))
    {
    }

    PairingValue query(const PairingQuery& q) const override
    {
        if (vanishes_by_degree(q)) return PairingValue::zero();
        if (q.kind == PairingKind::reduction) {
            auto [a, ba] = split(q.level, q.a);
            auto [bb, bbeta] = split(q.level, q.b);
            if (ba != bbeta) return PairingValue::zero();
            PairingQuery bq = q;
            bq.a = a;
            bq.b = bb;
            Rational raw = detail::exact_value(*base_.oracle, bq);
            if (raw == 0) return PairingValue::zero();
            const auto& lb = base_.levels.at(q.level);
            const auto& lp = product_.levels.at(q.level);
            int al = lb.gens[a].degree, alp = lp.gens[q.a].degree;
            int e = al * (lb.c + 1) + lb.c + alp * (lp.c + 1) + lp.c;
            return PairingValue::of(parity_sign(e) * raw);
        }
        if (q.kind != PairingKind::category) return PairingValue::zero();
        auto ch = detail::levels_of(q.segments);
        int s = ch.front(), t = ch.back();
        auto [a, ba] = split(s, q.a);
        auto [b, bb] = split(t, q.b);
        if (ch.size() > 2) {
            if (!b_.kernel_factor) throw MissingOracleFactor("no kernel pairing for factor " + b_.name);
            if (!b_.kernel_factor->is_zero())
                throw MissingOracleFactor("kernel pairing of factor " + b_.name + " does not vanish");
        }
        if (ba != bb) return PairingValue::zero();
        PairingQuery bq;
        bq.kind = PairingKind::category;
        bq.segments = q.segments;
        bq.a = a;
        bq.b = b;
        const auto& ls = base_.levels.at(s);
        const auto& lt = base_.levels.at(t);
        bq.alpha_degree = ls.gens[a].degree;
        bq.gamma_degree = lt.gens[b].degree;
        bq.integrand_degree = bq.alpha_degree + lt.c - bq.gamma_degree;
        bq.chain_dim = 0;
        for (std::size_t i = 0; i + 1 < ch.size(); ++i) {
            bq.chain_dim += *base_.m(ch[i], ch[i + 1]);
            if (i > 0) {
                bq.junction_dims.push_back(base_.c(ch[i]));
                bq.integrand_degree += base_.c(ch[i]) - 1;
            }
        }
        if (vanishes_by_degree(bq)) return PairingValue::zero();
        Rational raw = detail::exact_value(*base_.oracle, bq);
        if (raw == 0) return PairingValue::zero();
        int e = detail::category_prefactor(base_, s, ch, bq.alpha_degree) +
                detail::category_prefactor(product_, s, ch, product_.levels.at(s).gens[q.a].degree);
        return PairingValue::of(parity_sign(e) * raw);
    }

    std::string name() const override { return "product"; }

private:
    // Product generators are ordered factor-major: all base generators paired
    // with the first basis element of B, then with the second, and so on.
    std::pair<std::size_t, std::size_t> split(int level, std::size_t idx) const
    {
        std::size_t n = base_.levels.at(level).gens.size();
        return {idx % n, idx / n};
    }

    FlowCategoryModel base_;
    FlowCategoryModel product_;
    ManifoldFactor b_;
};

inline FlowCategoryModel product_category(const FlowCategoryModel& fc, const ManifoldFactor& b)
{
    FlowCategoryModel out;
    out.name = fc.name + "x" + b.name;
    for (const auto& [i, l] : fc.levels) {
        LevelSpec p;
        p.c = l.c + b.dim;
        p.grading = l.grading;
        p.reduction = l.reduction;
        for (const auto& beta : b.basis)
            for (const auto& alpha : l.gens) {
                std::string label = alpha.label;
                if (!(beta.label == "1" && beta.degree == 0)) label += "*" + beta.label;
                p.gens.push_back({label, alpha.degree + beta.degree});
            }
        out.levels[i] = p;
    }
    for (const auto& [ij, d] : fc.moduli) out.moduli[ij] = d + b.dim;
    out.oracle = std::make_shared<ProductOracle>(fc, out, b);
    return out;
}

inline ManifoldFactor point_factor() { return {"pt", 0, {{"1", 0}}, QMatrix(1, 1)}; }

struct GysinResult {
    GradedComplex base;
    GradedComplex total;
    GradedComplex shifted_base;
    ChainMap pullback;
    ChainMap pushforward;
    ShortExactReport ses;
    std::map<int, QMatrix> connecting;
    std::size_t connecting_rank = 0;
    std::map<int, std::size_t> betti;
};

inline GysinResult finish_gysin(GradedComplex base, GradedComplex total, ChainMap pull, ChainMap push)
{
    GysinResult r;
    r.base = std::move(base);
    r.total = std::move(total);
    r.shifted_base = push.target;
    r.pullback = std::move(pull);
    r.pushforward = std::move(push);
    r.ses = short_exact_report(r.pullback, r.pushforward);
    if (!r.ses.exact()) throw NotAChainMap("Gysin maps do not form a short exact sequence");
    for (int q : degree_set(r.shifted_base)) {
        QMatrix m = connecting_map(r.pullback, r.pushforward, q);
        r.connecting_rank += rank(m);
        r.connecting[q] = m;
    }
    r.betti = cohomology_betti(r.total);
    return r;
}

// Trivial circle bundle: E = C x S^1 with fiber generator psi.
inline GysinResult gysin_trivial(const FlowCategoryModel& fc, const ManifoldFactor& circle)
{
    if (circle.dim != 1 || circle.basis.size() != 2) throw UnsupportedFiberDim("trivial bundles are built for circle fibers only");
    FlowCategoryModel e = product_category(fc, circle);
    GradedComplex gb = assemble_differential(fc);
    GradedComplex ge = assemble_differential(e);
    GradedComplex shifted = suspend(gb, -1);
    const std::size_t nb = gb.total_size();
    QMatrix pull(ge.total_size(), nb), push(nb, ge.total_size());
    for (const auto& [l, gens] : gb.levels) {
        std::size_t ob = gb.offset(l), oe = ge.offset(l), n = gens.size();
        for (std::size_t i = 0; i < n; ++i) {
            pull(oe + i, ob + i) = 1;
            push(ob + i, oe + n + i) = parity_sign(gens[i].degree);
        }
    }
    return finish_gysin(gb, ge, ChainMap::from_total(gb, ge, pull), ChainMap::from_total(ge, shifted, push));
}

// Single critical manifold with a tabulated sphere bundle of fiber dimension k:
// generators pi*theta and pi*theta ^ psi, with the reduction pairing supplying
// d(pi*theta ^ psi) in terms of the Euler class.
inline GysinResult gysin_tabulated(const FlowCategoryModel& base, int k, OraclePtr bundle_oracle)
{
    if (base.levels.size() != 1) throw UnsupportedFiberDim("tabulated bundles are supported over a single critical manifold");
    if (k < 1) throw UnsupportedFiberDim("fiber dimension must be positive");
    const auto& [lvl, ls] = *base.levels.begin();
    FlowCategoryModel e;
    e.name = base.name + "-bundle";
    LevelSpec le;
    le.c = ls.c + k;
    le.grading = ls.grading;
    le.reduction = true;
    for (const auto& g : ls.gens) le.gens.push_back({"pi*" + g.label, g.degree});
    for (const auto& g : ls.gens) le.gens.push_back({"pi*" + g.label + "^psi", g.degree + k});
    e.levels[lvl] = le;
    e.oracle = std::move(bundle_oracle);
    GradedComplex gb = assemble_differential(base);
    GradedComplex ge = assemble_differential(e);
    GradedComplex shifted = suspend(gb, -k);
    const std::size_t n = ls.gens.size();
    QMatrix pull(2 * n, n), push(n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        pull(i, i) = parity_sign(static_cast<long>(k) * ls.gens[i].degree);
        push(i, n + i) = 1;
    }
    return finish_gysin(gb, ge, ChainMap::from_total(gb, ge, pull), ChainMap::from_total(ge, shifted, push));
}

} // namespace flowcat
