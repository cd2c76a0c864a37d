#pragma once

#include <cstdint>
#include <cstdlib>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "complexes.hpp"

namespace flowcat {

struct PerturbationData {
    std::map<int, QMatrix> p;
    std::map<int, QMatrix> h;
};

inline Report verify_perturbation_data(const GradedComplex& a, const PerturbationData& pd)
{
    Report r;
    for (const auto& [l, gens] : a.levels) {
        const std::size_t n = gens.size();
        auto ip = pd.p.find(l);
        auto ih = pd.h.find(l);
        if (ip == pd.p.end() || ih == pd.h.end()) throw ShapeMismatch("no perturbation data for level " + std::to_string(l));
        const QMatrix& p = ip->second;
        const QMatrix& h = ih->second;
        if (p.rows() != n || p.cols() != n || h.rows() != n || h.cols() != n)
            throw ShapeMismatch("perturbation data at level " + std::to_string(l) + " does not match " + std::to_string(n) + " generators");
        QMatrix d0 = a.block(l, 0);
        if (p * p != p) r.push_back({l, 0, "p is not idempotent"});
        if (QMatrix::identity(n) - p != d0 * h + h * d0) r.push_back({l, 0, "id - p != d0 H + H d0"});
    }
    return r;
}

struct LevelSplitting {
    QMatrix iota;
    QMatrix pi;
    std::vector<std::size_t> image_positions;
};

inline LevelSplitting level_splitting(const QMatrix& p)
{
    LevelSplitting s;
    s.image_positions = pivot_columns(p);
    std::vector<std::size_t> rows(p.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    s.iota = p.select(rows, s.image_positions);
    s.pi = left_inverse(s.iota) * p;
    return s;
}

namespace detail {

inline void check_sequence(const std::vector<int>& T, int k)
{
    if (T.size() < 2 || T.front() != 0 || T.back() != k) throw BadSequence("sequence must run from 0 to k");
    for (std::size_t i = 1; i < T.size(); ++i)
        if (T[i] <= T[i - 1]) throw BadSequence("sequence must be strictly increasing");
}

} // namespace detail

// The operator for one jump sequence T = {0 = i_0 < ... < i_r = k}; every
// homotopy insertion contributes a factor of -H.
inline QMatrix perturbed_operator(const GradedComplex& a, const PerturbationData& pd, int s, int k, const std::vector<int>& T)
{
    detail::check_sequence(T, k);
    auto src = level_splitting(pd.p.at(s));
    auto tgt = level_splitting(pd.p.at(s + k));
    QMatrix acc = src.iota;
    for (std::size_t w = 1; w < T.size(); ++w) {
        int from = s + T[w - 1];
        int to = s + T[w];
        if (!a.levels.count(to)) return QMatrix(tgt.pi.rows(), src.iota.cols());
        if (w > 1) acc = (-pd.h.at(from)) * acc;
        acc = a.block(from, to - from) * acc;
    }
    return tgt.pi * acc;
}

inline GradedComplex perturbed_complex(const GradedComplex& a, const PerturbationData& pd)
{
    auto bad = verify_perturbation_data(a, pd);
    if (!bad.empty()) throw ShapeMismatch("perturbation data fails at " + describe(bad));
    std::map<int, LevelSplitting> split;
    GradedComplex out;
    for (const auto& [l, gens] : a.levels) {
        split[l] = level_splitting(pd.p.at(l));
        std::vector<Generator> g;
        for (auto j : split[l].image_positions) g.push_back({gens[j].label, gens[j].degree});
        out.levels[l] = g;
        if (a.grading.count(l)) out.grading[l] = a.grading.at(l);
    }
    auto lv = a.level_indices();
    for (std::size_t si = 0; si < lv.size(); ++si) {
        int s = lv[si];
        // acc[t] = sum over sequences ending at t of the composite before the final projection.
        std::map<int, QMatrix> acc;
        for (std::size_t ti = si + 1; ti < lv.size(); ++ti) {
            int t = lv[ti];
            QMatrix w = a.block(s, t - s) * split[s].iota;
            for (std::size_t ui = si + 1; ui < ti; ++ui) {
                int u = lv[ui];
                w = w + a.block(u, t - u) * ((-pd.h.at(u)) * acc.at(u));
            }
            acc[t] = w;
            out.set_block(s, t - s, split[t].pi * w);
        }
        out.set_block(s, 0, split[s].pi * a.block(s, 0) * split[s].iota);
    }
    return out;
}

// Per level and degree: V = harmonic + d0(W) + W, with H inverting d0 on d0(W).
inline PerturbationData harmonic_data(const GradedComplex& a)
{
    PerturbationData pd;
    for (const auto& [l, gens] : a.levels) {
        const std::size_t n = gens.size();
        QMatrix d0 = a.block(l, 0);
        std::vector<QVector> harm;
        std::vector<int> degs;
        for (const auto& g : gens) degs.push_back(g.degree);
        std::set<int> ds(degs.begin(), degs.end());
        std::vector<QVector> all_bnd, all_w;
        for (int q : ds) {
            auto pos = positions_of_degree(degs, q);
            auto lift = [&](const QVector& v) {
                QVector full(n, Rational(0));
                for (std::size_t i = 0; i < pos.size(); ++i) full[pos[i]] = v[i];
                return full;
            };
            std::vector<std::size_t> rows(n);
            for (std::size_t i = 0; i < n; ++i) rows[i] = i;
            QMatrix dq = d0.select(rows, pos);
            // W: coordinate vectors on the pivot columns of d0 restricted to degree q.
            for (auto j : pivot_columns(dq)) {
                QVector e(pos.size(), Rational(0));
                e[j] = 1;
                all_w.push_back(lift(e));
                all_bnd.push_back(d0 * lift(e));
            }
        }
        for (int q : ds) {
            auto pos = positions_of_degree(degs, q);
            std::vector<QVector> acc;
            for (const auto& b : all_bnd) {
                bool in_q = true;
                for (std::size_t i = 0; i < n; ++i)
                    if (b[i] != 0 && degs[i] != q) in_q = false;
                if (in_q) acc.push_back(b);
            }
            std::vector<std::size_t> rows(n);
            for (std::size_t i = 0; i < n; ++i) rows[i] = i;
            QMatrix dq = d0.select(rows, pos);
            for (const auto& z : kernel_basis(dq)) {
                QVector full(n, Rational(0));
                for (std::size_t i = 0; i < pos.size(); ++i) full[pos[i]] = z[i];
                std::size_t r0 = span_rank(acc, n);
                acc.push_back(full);
                if (span_rank(acc, n) > r0) harm.push_back(full);
                else acc.pop_back();
            }
        }
        std::vector<QVector> cols = harm;
        cols.insert(cols.end(), all_bnd.begin(), all_bnd.end());
        cols.insert(cols.end(), all_w.begin(), all_w.end());
        if (cols.size() != n) throw SingularMatrix("level " + std::to_string(l) + " does not split: d0^2 != 0?");
        QMatrix m = QMatrix::from_columns(n, cols);
        QMatrix minv = inverse(m);
        QMatrix pp(n, n), hh(n, n);
        for (std::size_t i = 0; i < harm.size(); ++i) pp(i, i) = 1;
        const std::size_t nb = all_bnd.size();
        for (std::size_t j = 0; j < nb; ++j) hh(harm.size() + nb + j, harm.size() + j) = 1;
        pd.p[l] = m * pp * minv;
        pd.h[l] = m * hh * minv;
    }
    return pd;
}

inline PerturbationData trivial_data(const GradedComplex& a)
{
    PerturbationData pd;
    for (const auto& [l, g] : a.levels) {
        pd.p[l] = QMatrix::identity(g.size());
        pd.h[l] = QMatrix(g.size(), g.size());
    }
    return pd;
}

inline std::uint64_t seed_from_env(std::uint64_t fallback = 20240611ULL)
{
    if (const char* s = std::getenv("FLOWCAT_SEED")) {
        try {
            return std::stoull(s);
        } catch (...) {
            throw ParseError(std::string("FLOWCAT_SEED is not an integer: ") + s);
        }
    }
    return fallback;
}

struct RandomFiltered {
    GradedComplex complex;
    std::map<int, std::size_t> expected_betti;
};

// A filtered complex obtained by conjugating a paired differential with a
// unit-lower-triangular, degree-preserving change of basis. The Betti numbers
// are the counts of unpaired generators, known before any elimination.
inline RandomFiltered random_filtered_complex(std::mt19937_64& rng, int level_count = 4, int max_degree = 3)
{
    std::uniform_int_distribution<int> pick_level(0, level_count - 1);
    std::uniform_int_distribution<int> pick_degree(0, max_degree - 1);
    std::uniform_int_distribution<int> pick_small(-3, 3);
    std::uniform_int_distribution<int> pick_count(1, 3);
    std::uniform_int_distribution<int> coin(0, 2);

    struct Gen { int level; int degree; };
    std::vector<Gen> gens;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::map<int, std::size_t> betti;

    int npairs = pick_count(rng) + 2;
    for (int i = 0; i < npairs; ++i) {
        int l1 = pick_level(rng);
        int l2 = std::min(level_count - 1, l1 + coin(rng));
        int q = pick_degree(rng);
        gens.push_back({l1, q});
        gens.push_back({l2, q + 1});
        pairs.push_back({gens.size() - 2, gens.size() - 1});
    }
    int nfree = pick_count(rng);
    for (int i = 0; i < nfree; ++i) {
        int q = pick_degree(rng) + coin(rng) % 2;
        gens.push_back({pick_level(rng), q});
        betti[q] += 1;
    }
    for (int l = 0; l < level_count; ++l) gens.push_back({l, l % 2});
    for (int l = 0; l < level_count; ++l) betti[l % 2] += 1;

    std::vector<std::size_t> order(gens.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (gens[x].level != gens[y].level) return gens[x].level < gens[y].level;
        return gens[x].degree < gens[y].degree;
    });
    std::vector<std::size_t> where(gens.size());
    for (std::size_t i = 0; i < order.size(); ++i) where[order[i]] = i;

    const std::size_t n = gens.size();
    QMatrix d0(n, n);
    const int weights[] = {1, -1, 2, -2, 3};
    std::uniform_int_distribution<int> pick_weight(0, 4);
    for (auto [x, y] : pairs) d0(where[y], where[x]) = weights[pick_weight(rng)];

    QMatrix g = QMatrix::identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const auto& gi = gens[order[i]];
            const auto& gj = gens[order[j]];
            if (gi.degree == gj.degree && gi.level >= gj.level) g(i, j) = pick_small(rng);
        }
    QMatrix scale(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        int v = pick_small(rng);
        scale(i, i) = v == 0 ? 1 : v;
    }
    QMatrix gg = g * scale;
    QMatrix d = gg * d0 * inverse(gg);

    RandomFiltered out;
    std::map<int, int> counter;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& gi = gens[order[i]];
        out.complex.levels[gi.level].push_back({"g" + std::to_string(gi.level) + "_" + std::to_string(counter[gi.level]++), gi.degree});
    }
    out.complex.assign_total(d);
    out.expected_betti = betti;
    return out;
}

} // namespace flowcat
