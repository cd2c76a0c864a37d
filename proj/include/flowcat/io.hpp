#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "category.hpp"
#include "hpl.hpp"
#include "morse_engine.hpp"

namespace flowcat {

using json = nlohmann::json;

// Oracle that remembers the builtin it was created from, so models survive a
// save/load cycle.
class BuiltinOracle : public PairingOracle {
public:
    BuiltinOracle(std::string builtin, json params, OraclePtr inner)
        : builtin_(std::move(builtin)), params_(std::move(params)), inner_(std::move(inner))
    {
    }

    PairingValue query(const PairingQuery& q) const override { return inner_->query(q); }
    std::string name() const override { return "builtin:" + builtin_; }
    const std::string& builtin() const { return builtin_; }
    const json& params() const { return params_; }
    const OraclePtr& inner() const { return inner_; }

private:
    std::string builtin_;
    json params_;
    OraclePtr inner_;
};

struct LoadOptions {
    double snap_tolerance = 1e-6;
};

namespace detail {

inline const json& require(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
    return j.at(key);
}

inline int get_int(const json& j, const char* key)
{
    const json& v = require(j, key);
    if (!v.is_number_integer()) throw ParseError(std::string("field '") + key + "' must be an integer");
    return v.get<int>();
}

inline Rational get_rational(const json& v)
{
    if (v.is_number_integer()) return Rational(v.get<long>());
    if (v.is_string()) return parse_rational(v.get<std::string>());
    throw ParseError("rationals are written as integers or \"p/q\" strings");
}

inline PairingQuery parse_key(const std::string& key)
{
    PairingQuery q;
    std::vector<std::string> parts;
    std::stringstream ss(key);
    std::string item;
    while (std::getline(ss, item, '|')) parts.push_back(item);
    if (parts.size() != 4) throw ParseError("bad pairing key '" + key + "'");
    q.kind = parse_kind(parts[0]);
    std::string segs = parts[1];
    if (q.kind == PairingKind::reduction) {
        if (segs.empty() || segs[0] != 'L') throw ParseError("bad reduction key '" + key + "'");
        q.level = std::stoi(segs.substr(1));
    } else {
        std::stringstream s2(segs);
        std::string seg;
        while (std::getline(s2, seg, ',')) {
            auto colon = seg.find(':');
            if (seg.size() < 4 || colon == std::string::npos) throw ParseError("bad segment '" + seg + "'");
            q.segments.push_back({seg[0], std::stoi(seg.substr(1, colon - 1)), std::stoi(seg.substr(colon + 1))});
        }
    }
    q.a = std::stoul(parts[2]);
    q.b = std::stoul(parts[3]);
    return q;
}

inline json matrix_to_json(const QMatrix& m)
{
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(format_rational(m(i, j)));
        rows.push_back(row);
    }
    return rows;
}

inline QMatrix matrix_from_json(const json& j)
{
    if (!j.is_array()) throw ParseError("matrix must be an array of rows");
    std::vector<std::vector<Rational>> rows;
    for (const auto& r : j) {
        if (!r.is_array()) throw ParseError("matrix row must be an array");
        std::vector<Rational> row;
        for (const auto& v : r) row.push_back(get_rational(v));
        if (!rows.empty() && row.size() != rows[0].size()) throw ParseError("ragged matrix");
        rows.push_back(row);
    }
    return QMatrix::from_rows(rows);
}

inline json dims_to_json(const DimTable& t)
{
    json a = json::array();
    for (const auto& [ij, d] : t) a.push_back({{"from", ij.first}, {"to", ij.second}, {"dim", d}});
    return a;
}

inline DimTable dims_from_json(const json& j)
{
    DimTable t;
    if (!j.is_array()) throw ParseError("dimension table must be an array");
    for (const auto& e : j) t[{get_int(e, "from"), get_int(e, "to")}] = get_int(e, "dim");
    return t;
}

} // namespace detail

inline json complex_to_json(const GradedComplex& c)
{
    json levels = json::array();
    for (const auto& [i, gens] : c.levels) {
        json g = json::array();
        for (const auto& x : gens) g.push_back({{"label", x.label}, {"degree", x.degree}});
        json lj{{"index", i}, {"generators", g}};
        if (c.grading.count(i)) lj["grading"] = c.grading.at(i);
        levels.push_back(lj);
    }
    json blocks = json::array();
    for (const auto& [sk, m] : c.blocks) blocks.push_back({{"s", sk.first}, {"k", sk.second}, {"matrix", detail::matrix_to_json(m)}});
    return {{"schema", 1}, {"levels", levels}, {"blocks", blocks}};
}

inline GradedComplex complex_from_json(const json& j)
{
    GradedComplex c;
    for (const auto& lj : detail::require(j, "levels")) {
        std::vector<Generator> gens;
        for (const auto& g : detail::require(lj, "generators"))
            gens.push_back({detail::require(g, "label").get<std::string>(), detail::get_int(g, "degree")});
        std::optional<int> grade;
        if (lj.contains("grading")) grade = lj.at("grading").get<int>();
        c.add_level(detail::get_int(lj, "index"), gens, grade);
    }
    if (j.contains("blocks"))
        for (const auto& b : j.at("blocks")) {
            int s = detail::get_int(b, "s"), k = detail::get_int(b, "k");
            QMatrix m = detail::matrix_from_json(detail::require(b, "matrix"));
            if (!c.levels.count(s) || !c.levels.count(s + k) || m.rows() != c.size(s + k) || m.cols() != c.size(s))
                throw ParseError("block (" + std::to_string(s) + "," + std::to_string(k) + ") has the wrong shape");
            c.set_block(s, k, m);
        }
    return c;
}

inline json perturbation_to_json(const PerturbationData& pd)
{
    json p = json::array(), h = json::array();
    for (const auto& [l, m] : pd.p) p.push_back({{"level", l}, {"matrix", detail::matrix_to_json(m)}});
    for (const auto& [l, m] : pd.h) h.push_back({{"level", l}, {"matrix", detail::matrix_to_json(m)}});
    return {{"p", p}, {"h", h}};
}

inline PerturbationData perturbation_from_json(const json& j)
{
    PerturbationData pd;
    for (const auto& e : detail::require(j, "p")) pd.p[detail::get_int(e, "level")] = detail::matrix_from_json(detail::require(e, "matrix"));
    for (const auto& e : detail::require(j, "h")) pd.h[detail::get_int(e, "level")] = detail::matrix_from_json(detail::require(e, "matrix"));
    return pd;
}

inline json oracle_to_json(const OraclePtr& o)
{
    if (auto b = std::dynamic_pointer_cast<const BuiltinOracle>(o)) {
        json j = b->params();
        j["kind"] = "builtin";
        j["name"] = b->builtin();
        return j;
    }
    if (auto c = std::dynamic_pointer_cast<const MorseCountOracle>(o)) {
        json counts = json::array();
        for (const auto& [ij, m] : c->counts) counts.push_back({{"from", ij.first}, {"to", ij.second}, {"matrix", detail::matrix_to_json(m)}});
        return {{"kind", "counts"}, {"counts", counts}};
    }
    if (auto t = std::dynamic_pointer_cast<const TabulatedOracle>(o)) {
        json entries = json::array();
        for (const auto& [key, v] : t->table) {
            PairingQuery q = detail::parse_key(key);
            json e{{"type", to_string(q.kind)}, {"a", q.a}, {"b", q.b}, {"value", format_rational(v)}};
            if (q.kind == PairingKind::reduction) e["level"] = q.level;
            else {
                json segs = json::array();
                for (const auto& s : q.segments) segs.push_back({std::string(1, s.space), s.from, s.to});
                e["segments"] = segs;
            }
            entries.push_back(e);
        }
        return {{"kind", "tabulated"}, {"entries", entries}};
    }
    if (std::dynamic_pointer_cast<const ZeroOracle>(o)) return {{"kind", "tabulated"}, {"entries", json::array()}};
    throw ParseError("oracle '" + o->name() + "' cannot be serialized");
}

inline OraclePtr oracle_from_json(const json& j, const std::map<int, LevelSpec>& levels, const LoadOptions& opt = {})
{
    std::string kind = detail::require(j, "kind").get<std::string>();
    if (kind == "counts") {
        auto o = std::make_shared<MorseCountOracle>();
        for (const auto& e : detail::require(j, "counts"))
            o->counts[{detail::get_int(e, "from"), detail::get_int(e, "to")}] = detail::matrix_from_json(detail::require(e, "matrix"));
        return o;
    }
    if (kind == "tabulated") {
        auto o = std::make_shared<TabulatedOracle>();
        for (const auto& e : detail::require(j, "entries")) {
            if (e.contains("key")) {
                PairingQuery q = detail::parse_key(e.at("key").get<std::string>());
                o->table[q.key()] = detail::get_rational(detail::require(e, "value"));
                continue;
            }
            PairingKind k = parse_kind(detail::require(e, "type").get<std::string>());
            std::vector<Segment> segs;
            if (e.contains("segments"))
                for (const auto& s : e.at("segments")) {
                    if (!s.is_array() || s.size() != 3 || !s[0].is_string() || s[0].get<std::string>().size() != 1)
                        throw ParseError("segment must be [space, from, to]");
                    segs.push_back({s[0].get<std::string>()[0], s[1].get<int>(), s[2].get<int>()});
                }
            int level = e.contains("level") ? e.at("level").get<int>() : 0;
            o->set(k, segs, e.at("a").get<std::size_t>(), e.at("b").get<std::size_t>(), detail::get_rational(detail::require(e, "value")), level);
        }
        return o;
    }
    if (kind == "builtin") {
        std::string name = detail::require(j, "name").get<std::string>();
        json params = j;
        params.erase("kind");
        params.erase("name");
        if (name == "s2-bott") {
            CircleDefiningData data;
            if (params.contains("kappa")) {
                const json& k = params.at("kappa");
                data.kappa = k.is_number() ? k.get<double>() : detail::get_rational(k).get_d();
            }
            auto base = build_morsebott_s2_example(data);
            auto q = std::dynamic_pointer_cast<const QuadratureOracle>(base.oracle);
            auto copy = std::make_shared<QuadratureOracle>(*q);
            copy->snap_tolerance = opt.snap_tolerance;
            return std::make_shared<BuiltinOracle>(name, params, copy);
        }
        if (name == "identity") return std::make_shared<BuiltinOracle>(name, params, std::make_shared<IdentityOracle>(levels));
        if (name == "zero") return std::make_shared<BuiltinOracle>(name, params, std::make_shared<ZeroOracle>());
        throw ParseError("unknown builtin oracle '" + name + "'");
    }
    throw ParseError("unknown oracle kind '" + kind + "'");
}

// The Morse-Bott z^2 model with its quadrature oracle tagged as a builtin.
inline FlowCategoryModel s2_bott_model(const CircleDefiningData& data = {})
{
    auto fc = build_morsebott_s2_example(data);
    json params = json::object();
    if (data.kappa != 0.0) params["kappa"] = data.kappa;
    fc.oracle = std::make_shared<BuiltinOracle>("s2-bott", params, fc.oracle);
    return fc;
}

inline json model_to_json(const FlowCategoryModel& fc)
{
    json j;
    j["schema"] = 1;
    j["name"] = fc.name;
    json levels = json::array();
    for (const auto& [i, l] : fc.levels) {
        json gens = json::array();
        for (const auto& g : l.gens) gens.push_back({{"label", g.label}, {"degree", g.degree}});
        json lj{{"index", i}, {"c", l.c}, {"generators", gens}};
        if (l.grading) lj["grading"] = *l.grading;
        if (l.reduction) lj["reduction"] = true;
        levels.push_back(lj);
    }
    j["levels"] = levels;
    j["moduli"] = detail::dims_to_json(fc.moduli);
    j["oracle"] = oracle_to_json(fc.oracle);
    return j;
}

inline FlowCategoryModel model_from_json(const json& j, const LoadOptions& opt = {})
{
    if (!j.is_object()) throw ParseError("model must be a JSON object");
    if (j.contains("schema") && j.at("schema") != 1) throw ParseError("unsupported schema version");
    FlowCategoryModel fc;
    fc.name = j.value("name", std::string("model"));
    for (const auto& lj : detail::require(j, "levels")) {
        LevelSpec l;
        l.c = detail::get_int(lj, "c");
        if (lj.contains("grading")) l.grading = lj.at("grading").get<int>();
        l.reduction = lj.value("reduction", false);
        for (const auto& g : detail::require(lj, "generators"))
            l.gens.push_back({detail::require(g, "label").get<std::string>(), detail::get_int(g, "degree")});
        int idx = detail::get_int(lj, "index");
        if (fc.levels.count(idx)) throw ParseError("duplicate level " + std::to_string(idx));
        fc.levels[idx] = l;
    }
    if (j.contains("moduli")) fc.moduli = detail::dims_from_json(j.at("moduli"));
    if (j.contains("oracle")) fc.oracle = oracle_from_json(j.at("oracle"), fc.levels, opt);
    return fc;
}

inline json morphism_to_json(const FlowMorphismModel& fm, bool with_source = true)
{
    json j{{"target", model_to_json(fm.target)}, {"dims", detail::dims_to_json(fm.dims)}, {"cutoff", fm.cutoff},
           {"oracle", oracle_to_json(fm.oracle)}};
    if (with_source) j["source"] = model_to_json(fm.source);
    return j;
}

// The source defaults to `fallback` (the enclosing document's model).
inline FlowMorphismModel morphism_from_json(const json& j, const FlowCategoryModel& fallback, const LoadOptions& opt = {})
{
    FlowMorphismModel fm;
    fm.source = j.contains("source") ? model_from_json(j.at("source"), opt) : fallback;
    fm.target = j.contains("target") ? model_from_json(j.at("target"), opt) : fallback;
    fm.dims = detail::dims_from_json(detail::require(j, "dims"));
    fm.cutoff = j.value("cutoff", 0);
    std::map<int, LevelSpec> shared;
    for (const auto& [i, l] : fm.source.levels)
        if (fm.target.levels.count(i)) shared[i] = l;
    if (j.contains("oracle")) fm.oracle = oracle_from_json(j.at("oracle"), shared, opt);
    return fm;
}

struct Document {
    FlowCategoryModel model;
    std::optional<FlowMorphismModel> morphism;
    std::optional<FlowHomotopyModel> homotopy;
    std::optional<CompositionModel> composition;
    std::optional<int> gysin_k;
    OraclePtr gysin_oracle;
};

inline Document document_from_json(const json& j, const LoadOptions& opt = {})
{
    Document d;
    d.model = model_from_json(j, opt);
    if (j.contains("morphism")) d.morphism = morphism_from_json(j.at("morphism"), d.model, opt);
    if (j.contains("homotopy")) {
        const json& h = j.at("homotopy");
        FlowHomotopyModel km;
        km.f = morphism_from_json(detail::require(h, "f"), d.model, opt);
        km.h = morphism_from_json(detail::require(h, "h"), d.model, opt);
        km.dims = detail::dims_from_json(detail::require(h, "dims"));
        km.cutoff = h.value("cutoff", 0);
        if (h.contains("oracle")) km.oracle = oracle_from_json(h.at("oracle"), {}, opt);
        d.homotopy = km;
    }
    if (j.contains("composition")) {
        const json& c = j.at("composition");
        CompositionModel cm;
        cm.h = morphism_from_json(detail::require(c, "h"), d.model, opt);
        cm.f = morphism_from_json(detail::require(c, "f"), cm.h.target, opt);
        json fh = detail::require(c, "fh");
        if (!fh.contains("target")) fh["target"] = model_to_json(cm.f.target);
        cm.fh = morphism_from_json(fh, d.model, opt);
        if (c.contains("mixed")) cm.mixed = oracle_from_json(c.at("mixed"), {}, opt);
        d.composition = cm;
    }
    if (j.contains("gysin")) {
        const json& g = j.at("gysin");
        d.gysin_k = detail::get_int(g, "k");
        d.gysin_oracle = oracle_from_json(detail::require(g, "oracle"), {}, opt);
    }
    return d;
}

inline json document_to_json(const Document& d)
{
    json j = model_to_json(d.model);
    if (d.morphism) j["morphism"] = morphism_to_json(*d.morphism);
    if (d.homotopy)
        j["homotopy"] = {{"f", morphism_to_json(d.homotopy->f)},
                         {"h", morphism_to_json(d.homotopy->h)},
                         {"dims", detail::dims_to_json(d.homotopy->dims)},
                         {"cutoff", d.homotopy->cutoff},
                         {"oracle", oracle_to_json(d.homotopy->oracle)}};
    if (d.composition)
        j["composition"] = {{"h", morphism_to_json(d.composition->h)},
                            {"f", morphism_to_json(d.composition->f)},
                            {"fh", morphism_to_json(d.composition->fh)},
                            {"mixed", oracle_to_json(d.composition->mixed)}};
    if (d.gysin_k) j["gysin"] = {{"k", *d.gysin_k}, {"oracle", oracle_to_json(d.gysin_oracle)}};
    return j;
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline Document load_document(const std::string& path, const LoadOptions& opt = {})
{
    json j = read_json_file(path);
    try {
        return document_from_json(j, opt);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void save_json(const std::string& path, const json& j)
{
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << j.dump(2) << '\n';
}

} // namespace flowcat
