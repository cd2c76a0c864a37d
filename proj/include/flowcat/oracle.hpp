#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace flowcat {

enum class PairingKind { category, reduction, morphism, mixed, homotopy };

inline std::string to_string(PairingKind k)
{
    switch (k) {
    case PairingKind::category: return "category";
    case PairingKind::reduction: return "reduction";
    case PairingKind::morphism: return "morphism";
    case PairingKind::mixed: return "mixed";
    case PairingKind::homotopy: return "homotopy";
    }
    return "?";
}

inline PairingKind parse_kind(const std::string& s)
{
    if (s == "category") return PairingKind::category;
    if (s == "reduction") return PairingKind::reduction;
    if (s == "morphism") return PairingKind::morphism;
    if (s == "mixed") return PairingKind::mixed;
    if (s == "homotopy") return PairingKind::homotopy;
    throw ParseError("unknown pairing kind '" + s + "'");
}

// One factor of a moduli product. `space` is 'C','D','E' for category moduli
// and 'H','F','K' for morphism or homotopy spaces.
struct Segment {
    char space = 'C';
    int from = 0;
    int to = 0;

    bool operator==(const Segment& o) const { return space == o.space && from == o.from && to == o.to; }
};

struct PairingQuery {
    PairingKind kind = PairingKind::category;
    std::vector<Segment> segments;
    int level = 0;
    std::size_t a = 0;
    std::size_t b = 0;
    std::vector<int> junction_dims;
    int integrand_degree = 0;
    int chain_dim = 0;
    int alpha_degree = 0;
    int gamma_degree = 0;

    std::string key() const
    {
        std::ostringstream os;
        os << to_string(kind) << '|';
        if (kind == PairingKind::reduction) os << "L" << level;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (i) os << ',';
            os << segments[i].space << segments[i].from << ':' << segments[i].to;
        }
        os << '|' << a << '|' << b;
        return os.str();
    }
};

struct PairingValue {
    Rational exact = 0;
    double approx = 0.0;
    bool is_exact = true;
    bool snapped = false;

    static PairingValue of(const Rational& q) { return {q, q.get_d(), true, false}; }
    static PairingValue zero() { return of(Rational(0)); }
};

// True when a kernel of negative degree sits at a junction, or the form
// degree cannot match the dimension of the moduli product.
inline bool vanishes_by_degree(const PairingQuery& q)
{
    if (q.kind == PairingKind::reduction) return false;
    for (int c : q.junction_dims)
        if (c == 0) return true;
    return q.integrand_degree != q.chain_dim;
}

class PairingOracle {
public:
    virtual ~PairingOracle() = default;
    virtual PairingValue query(const PairingQuery& q) const = 0;
    virtual std::string name() const = 0;
};

using OraclePtr = std::shared_ptr<const PairingOracle>;

class ZeroOracle : public PairingOracle {
public:
    PairingValue query(const PairingQuery&) const override { return PairingValue::zero(); }
    std::string name() const override { return "zero"; }
};

// counts[(i,j)](a, b): signed count of rigid lines from generator a at level
// i to generator b at level j.
class MorseCountOracle : public PairingOracle {
public:
    std::map<std::pair<int, int>, QMatrix> counts;

    PairingValue query(const PairingQuery& q) const override
    {
        if (vanishes_by_degree(q)) return PairingValue::zero();
        if (q.kind != PairingKind::category || q.segments.size() != 1) return PairingValue::zero();
        return PairingValue::of(morse_pairing(q.segments[0].from, q.segments[0].to, q.a, q.b));
    }

    Rational morse_pairing(int i, int j, std::size_t a, std::size_t b) const
    {
        auto it = counts.find({i, j});
        if (it == counts.end()) return 0;
        if (a >= it->second.rows() || b >= it->second.cols()) return 0;
        return it->second(a, b);
    }

    std::string name() const override { return "counts"; }
};

class TabulatedOracle : public PairingOracle {
public:
    std::map<std::string, Rational> table;

    void set(PairingKind kind, std::vector<Segment> segments, std::size_t a, std::size_t b, const Rational& v, int level = 0)
    {
        PairingQuery q;
        q.kind = kind;
        q.segments = std::move(segments);
        q.a = a;
        q.b = b;
        q.level = level;
        table[q.key()] = v;
    }

    PairingValue query(const PairingQuery& q) const override
    {
        auto it = table.find(q.key());
        if (it == table.end()) return PairingValue::zero();
        return PairingValue::of(it->second);
    }

    std::string name() const override { return "tabulated"; }
};

} // namespace flowcat
