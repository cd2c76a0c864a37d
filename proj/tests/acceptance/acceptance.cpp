#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include <flowcat/flowcat.hpp>

using namespace flowcat;

namespace {

using Betti = std::map<int, std::size_t>;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::string note;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            if (!note.empty()) note += "; ";
            note += what;
        }
    }
};

std::string fixture(const std::string& name) { return std::string(FLOWCAT_FIXTURE_DIR) + "/" + name; }

Betti convolve(const Betti& a, const Betti& b)
{
    Betti out;
    for (const auto& [p, x] : a)
        for (const auto& [q, y] : b) out[p + q] += x * y;
    return out;
}

std::vector<RandomFiltered> random_family()
{
    std::mt19937_64 rng(seed_from_env());
    std::vector<RandomFiltered> out;
    for (int i = 0; i < 100; ++i) out.push_back(random_filtered_complex(rng));
    return out;
}

Outcome d_squared()
{
    Outcome o;
    for (const auto& s : {sphere_height(), torus_height(), sphere_constant()})
        o.require(verify_d_squared(assemble_differential(build_morse_flow_category(s))).empty(), s.name);
    o.require(verify_d_squared(assemble_differential(build_morsebott_s2_example())).empty(), "s2-bott");
    int bad = 0;
    for (const auto& rf : random_family())
        if (!verify_d_squared(rf.complex).empty()) ++bad;
    o.require(bad == 0, std::to_string(bad) + " random complexes");
    return o;
}

Outcome cohomology()
{
    Outcome o;
    Betti sphere{{0, 1}, {2, 1}}, torus{{0, 1}, {1, 2}, {2, 1}};
    o.require(cohomology_betti(assemble_differential(build_morse_flow_category(sphere_height()))) == sphere, "S2 height");
    o.require(cohomology_betti(assemble_differential(build_morse_flow_category(torus_height()))) == torus, "T2 height");
    auto fc = build_morsebott_s2_example();
    o.require(cohomology_betti(assemble_differential(fc)) == sphere, "S2 z^2");
    for (double v : morsebott_raw_values(fc)) o.require(std::abs(std::abs(v) - 1.0) < 1e-6, "raw quadrature value " + std::to_string(v));
    return o;
}

Outcome hpl()
{
    Outcome o;
    int bad = 0;
    for (const auto& rf : random_family()) {
        auto small = perturbed_complex(rf.complex, harmonic_data(rf.complex));
        if (cohomology_betti(small) != cohomology_betti(rf.complex) || cohomology_betti(small) != rf.expected_betti) ++bad;
    }
    o.require(bad == 0, std::to_string(bad) + " of 100 differ");
    return o;
}

Outcome identity_morphism_check()
{
    Outcome o;
    std::vector<FlowCategoryModel> models{build_morse_flow_category(sphere_height()), build_morse_flow_category(torus_height()),
                                          build_morse_flow_category(sphere_constant()), build_morsebott_s2_example(),
                                          load_document(fixture("hpl-small.json")).model};
    for (const auto& fc : models) {
        auto f = assemble_morphism_map(identity_morphism(fc));
        if (!is_unitriangular(f)) {
            o.require(false, fc.name + " not unitriangular");
            continue;
        }
        o.require(neumann_inverse(f).total() * f.total() == QMatrix::identity(f.source.total_size()), fc.name + " inverse");
    }
    auto a = build_morsebott_s2_example();
    auto b = build_morsebott_s2_example(CircleDefiningData{0.25});
    auto f = assemble_morphism_map(identity_type_morphism(a, b));
    o.require(verify_chain_map(f).empty(), "kernel variants chain map");
    o.require(induces_isomorphism(f), "kernel variants iso");
    o.require(cohomology_betti(f.source) == cohomology_betti(f.target), "kernel variants Betti");
    return o;
}

Outcome spectral()
{
    Outcome o;
    std::vector<std::pair<std::string, GradedComplex>> cases;
    for (const char* name : {"s2-morse.json", "t2-morse.json", "s2-bott.json", "gysin-s2-euler1.json", "gysin-s2-euler2.json",
                             "hpl-small.json", "compmor-triple.json", "homotopy-interval.json"})
        cases.push_back({name, assemble_differential(load_document(fixture(name)).model)});
    cases.push_back({"hpl-big.json", complex_from_json(read_json_file(fixture("hpl-big.json")))});
    auto rf = random_family();
    for (std::size_t i = 0; i < rf.size(); ++i) cases.push_back({"random " + std::to_string(i), rf[i].complex});
    for (const auto& [name, c] : cases) {
        FilteredComplex fc(c);
        auto pages = compute_pages(fc, stable_page(c) + 1);
        bool ok = true;
        for (const auto& pg : pages) {
            if (!pg.checks.empty()) ok = false;
            for (int p : c.level_indices())
                for (int q : degree_set(c)) {
                    QMatrix in = page_differential(pg, p, q);
                    QMatrix out = page_differential(pg, p + pg.r, q + 1);
                    if (in.rows() && out.cols() && !(out * in).is_zero()) ok = false;
                }
        }
        if (!e_infinity_vs_graded(fc).empty()) ok = false;
        o.require(ok, name);
    }
    return o;
}

Outcome gysin()
{
    Outcome o;
    auto g = gysin_trivial(build_morse_flow_category(sphere_height()), circle_factor());
    o.require(g.ses.exact(), "trivial bundle not exact");
    o.require(g.connecting_rank == 0, "trivial connecting map nonzero");
    o.require(g.betti == Betti{{0, 1}, {1, 1}, {2, 1}, {3, 1}}, "trivial total Betti");
    for (long n : {1L, 2L}) {
        auto doc = load_document(fixture("gysin-s2-euler" + std::to_string(n) + ".json"));
        auto t = gysin_tabulated(doc.model, *doc.gysin_k, doc.gysin_oracle);
        std::size_t entries = 0;
        bool magnitude = true;
        for (const auto& [q, m] : t.connecting)
            for (std::size_t i = 0; i < m.rows(); ++i)
                for (std::size_t j = 0; j < m.cols(); ++j)
                    if (m(i, j) != 0) {
                        ++entries;
                        if (abs(m(i, j)) != n) magnitude = false;
                    }
        GradedComplex direct;
        direct.add_level(0, {{"1", 0}, {"vol", 2}, {"psi", 1}, {"vol psi", 3}});
        QMatrix d(4, 4);
        d(1, 2) = n;
        direct.set_block(0, 0, d);
        std::string tag = "n=" + std::to_string(n);
        o.require(t.ses.exact(), tag + " not exact");
        o.require(t.connecting_rank == 1 && entries == 1 && magnitude, tag + " connecting map");
        o.require(t.betti == cohomology_betti(direct), tag + " Betti");
    }
    return o;
}

Outcome kunneth()
{
    Outcome o;
    Betti circle{{0, 1}, {1, 1}};
    for (const auto& s : {sphere_height(), torus_height()}) {
        auto fc = build_morse_flow_category(s);
        auto prod = product_category(fc, circle_factor());
        auto c = assemble_differential(prod);
        auto betti = cohomology_betti(c);
        o.require(betti == convolve(cohomology_betti(assemble_differential(fc)), circle), s.name + " x S1");
        o.require(cohomology_betti(twist_differential(c, prod.dims()).complex) == betti, s.name + " twist");
    }
    return o;
}

Outcome homotopies()
{
    Outcome o;
    auto comp = load_document(fixture("compmor-triple.json"));
    o.require(verify_chain_homotopy(assemble_composition_homotopy(*comp.composition)).empty(), "composition fixture");
    auto hom = load_document(fixture("homotopy-interval.json"));
    o.require(verify_chain_homotopy(assemble_homotopy_operator(*hom.homotopy)).empty(), "homotopy fixture");
    for (const auto& fc : {build_morse_flow_category(sphere_height()), build_morse_flow_category(torus_height())}) {
        auto id = identity_morphism(fc);
        CompositionModel cm{id, id, id, std::make_shared<ZeroOracle>()};
        o.require(verify_chain_homotopy(assemble_composition_homotopy(cm)).empty(), fc.name + " identity composition");
    }
    return o;
}

Outcome holim()
{
    Outcome o;
    GradedComplex a;
    a.add_level(0, {{"p", 0}, {"q", 2}});
    Tower id;
    id.stages = {a, a, a};
    id.maps = {ChainMap::identity(a), ChainMap::identity(a)};
    auto r = homotopy_limit(id);
    o.require(cohomology_betti(r.complex) == cohomology_betti(a), "identity tower");
    o.require(r.balanced(), "identity tower ranks");
    Tower zero;
    ChainMap z = ChainMap::from_total(a, a, QMatrix(2, 2));
    zero.stages = {a, a, a};
    zero.maps = {z, z};
    auto rz = homotopy_limit(zero);
    o.require(cohomology_betti(rz.complex).empty(), "zero tower");
    o.require(rz.balanced(), "zero tower ranks");
    return o;
}

Outcome subquotient()
{
    Outcome o;
    auto fc = build_morsebott_s2_example();
    auto s = subquotient_split(fc, {fc.level_list().back()});
    auto r = short_exact_report(assemble_morphism_map(s.inclusion), assemble_morphism_map(s.projection));
    o.require(r.exact(), "sequence not exact");
    return o;
}

} // namespace

int main()
{
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double limit_seconds;
    };
    std::vector<Criterion> criteria{
        {"d^2 = 0 on engine, Morse-Bott and random complexes", d_squared, 30.0},
        {"cohomology of S2, T2 and the S2 z^2 model", cohomology, 120.0},
        {"perturbed complexes keep their Betti numbers", hpl, 0.0},
        {"identity morphisms are unitriangular and canonical", identity_morphism_check, 0.0},
        {"spectral sequence pages, differentials and E-infinity", spectral, 0.0},
        {"Gysin sequences for trivial and Euler class bundles", gysin, 0.0},
        {"products with a circle and twisted differentials", kunneth, 0.0},
        {"composition and homotopy operators", homotopies, 0.0},
        {"homotopy limits of finite towers", holim, 0.0},
        {"sub and quotient split on the S2 z^2 model", subquotient, 0.0},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        Outcome o;
        auto start = Clock::now();
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.note = std::string("exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(Clock::now() - start).count();
        if (c.limit_seconds > 0 && secs > c.limit_seconds) o.require(false, "took " + std::to_string(secs) + " s");
        if (!o.pass) ++failed;
        std::printf("[%s] %zu %s (%.2f s)%s%s\n", o.pass ? "PASS" : "FAIL", i + 1, c.name, secs, o.note.empty() ? "" : ": ",
                    o.note.c_str());
    }
    return failed == 0 ? 0 : 1;
}
