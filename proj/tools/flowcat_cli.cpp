#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <regex>

#include <CLI11.hpp>
#include <flowcat/flowcat.hpp>

using namespace flowcat;

namespace {

struct JobConfig {
    std::string command;
    std::string input;
    std::string out;
    std::string emit;
    std::string csv;
    std::string demo;
    double tol = 1e-6;
    bool verbose_signs = false;
    int page = 0;
    int k = 0;
    bool trivial = false;
    int random = 0;
};

json betti_json(const std::map<int, std::size_t>& b)
{
    json j = json::object();
    for (const auto& [q, n] : b) j[std::to_string(q)] = n;
    return j;
}

double round9(double x) { return std::round(x * 1e9) / 1e9; }

json report_json(const Report& r, const SignTrace* trace)
{
    static const std::regex block(R"( s=(-?\d+) k=(-?\d+) )");
    json a = json::array();
    for (const auto& f : r) {
        json e{{"s", f.s}, {"k", f.k}};
        if (!f.detail.empty()) e["detail"] = f.detail;
        if (trace) {
            json lines = json::array();
            for (const auto& line : trace->lines) {
                std::smatch m;
                if (!std::regex_search(line, m, block)) continue;
                int s = std::stoi(m[1]), k = std::stoi(m[2]);
                if (s >= f.s && s + k <= f.s + f.k) lines.push_back(line);
            }
            e["sign_trace"] = lines;
        }
        a.push_back(e);
    }
    return a;
}

void finish(const JobConfig& cfg, const json& report)
{
    std::string text = report.dump();
    std::cout << text << '\n';
    if (!cfg.out.empty()) {
        std::ofstream os(cfg.out);
        if (!os) throw ParseError("cannot write " + cfg.out);
        os << text << '\n';
    }
}

void print_trace(const JobConfig& cfg, const SignTrace& trace)
{
    if (!cfg.verbose_signs) return;
    for (const auto& line : trace.lines) std::cerr << line << '\n';
}

LoadOptions load_options(const JobConfig& cfg)
{
    LoadOptions opt;
    opt.snap_tolerance = cfg.tol;
    return opt;
}

int run_verify(const JobConfig& cfg)
{
    Document doc = load_document(cfg.input, load_options(cfg));
    SignTrace trace;
    json checks = json::object();
    bool ok = true;
    auto record = [&](const std::string& name, const Report& r) {
        checks[name] = {{"pass", r.empty()}, {"failures", report_json(r, &trace)}};
        ok = ok && r.empty();
    };
    GradedComplex c = assemble_differential(doc.model, &trace);
    record("d_squared", verify_d_squared(c));
    record("degrees", doc.model.graded() ? verify_degrees(c) : Report{});
    record("parity", verify_parity(doc.model, c));
    if (doc.morphism) record("morphism_chain_map", verify_chain_map(assemble_morphism_map(*doc.morphism, &trace)));
    if (doc.homotopy) {
        Homotopy h = assemble_homotopy_operator(*doc.homotopy, &trace);
        record("homotopy_maps", [&] {
            Report r = verify_chain_map(h.f_map);
            for (const auto& f : verify_chain_map(h.h_map)) r.push_back(f);
            return r;
        }());
        record("homotopy_identity", verify_chain_homotopy(h));
    }
    if (doc.composition) record("composition_identity", verify_chain_homotopy(assemble_composition_homotopy(*doc.composition, &trace)));
    print_trace(cfg, trace);
    json report{{"model", doc.model.name}, {"pass", ok}, {"checks", checks}};
    if (cfg.verbose_signs) report["sign_trace"] = trace.lines;
    finish(cfg, report);
    return ok ? 0 : 1;
}

int run_cohomology(const JobConfig& cfg)
{
    Document doc = load_document(cfg.input, load_options(cfg));
    GradedComplex c = assemble_differential(doc.model);
    require_complex(c);
    if (doc.model.graded()) {
        finish(cfg, {{"betti", betti_json(cohomology_betti(c))}});
        return 0;
    }
    // Without a grading only the level-indexed dimensions are meaningful.
    FilteredComplex fc(c);
    auto page = compute_page(fc, stable_page(c) + 1);
    json levels = json::object();
    for (const auto& [p, n] : page.level_dims()) levels[std::to_string(p)] = n;
    finish(cfg, {{"level_dims", levels}});
    return 0;
}

int run_ss(const JobConfig& cfg)
{
    Document doc = load_document(cfg.input, load_options(cfg));
    GradedComplex c = assemble_differential(doc.model);
    FilteredComplex fc(c);
    int stable = stable_page(c);
    int r = cfg.page > 0 ? cfg.page : stable + 1;
    auto pages = compute_pages(fc, r);
    const auto& page = pages.back();
    Report checks;
    for (const auto& p : pages)
        for (const auto& f : p.checks) checks.push_back(f);
    Report einf = e_infinity_vs_graded(fc);
    json entries = json::array();
    for (const auto& [pq, n] : page.dims()) entries.push_back({{"p", pq.first}, {"q", pq.second}, {"dim", n}});
    json levels = json::array();
    for (const auto& [p, n] : page.level_dims()) levels.push_back(n);
    json diffs = json::array();
    for (const auto& [pq, e] : page.entries) {
        QMatrix m = page_differential(page, pq.first, pq.second);
        if (m.rows() && m.cols() && !m.is_zero())
            diffs.push_back({{"p", pq.first}, {"q", pq.second}, {"matrix", detail::matrix_to_json(m)}});
    }
    bool ok = checks.empty() && einf.empty();
    finish(cfg, {{"page", r},
                 {"stable_page", stable},
                 {"level_dims", levels},
                 {"entries", entries},
                 {"differentials", diffs},
                 {"page_checks", report_json(checks, nullptr)},
                 {"e_infinity", report_json(einf, nullptr)},
                 {"pass", ok}});
    return ok ? 0 : 1;
}

json induced_json(const ChainMap& f)
{
    json j = json::object();
    for (int q : joint_degrees(f)) j[std::to_string(q)] = detail::matrix_to_json(induced_map_matrix(f, q));
    return j;
}

int run_morphism(const JobConfig& cfg)
{
    Document doc = load_document(cfg.input, load_options(cfg));
    if (!doc.morphism) throw ParseError(cfg.input + " has no morphism section");
    SignTrace trace;
    ChainMap f = assemble_morphism_map(*doc.morphism, &trace);
    print_trace(cfg, trace);
    Report r = verify_chain_map(f);
    json report{{"chain_map", r.empty()}, {"failures", report_json(r, &trace)}};
    if (r.empty()) {
        report["source_betti"] = betti_json(cohomology_betti(f.source));
        report["target_betti"] = betti_json(cohomology_betti(f.target));
        report["induced"] = induced_json(f);
        report["isomorphism"] = induces_isomorphism(f);
    }
    finish(cfg, report);
    return r.empty() ? 0 : 1;
}

int run_gysin(const JobConfig& cfg)
{
    Document doc = load_document(cfg.input, load_options(cfg));
    GysinResult g;
    if (cfg.trivial) {
        if (cfg.k != 1) throw ParseError("trivial bundles need --k 1");
        g = gysin_trivial(doc.model, circle_factor());
    } else {
        if (!doc.gysin_k) throw ParseError(cfg.input + " has no gysin section; pass --trivial for a product bundle");
        if (cfg.k != 0 && cfg.k != *doc.gysin_k) throw ParseError("--k does not match the fiber dimension in " + cfg.input);
        g = gysin_tabulated(doc.model, *doc.gysin_k, doc.gysin_oracle);
    }
    json conn = json::object();
    for (const auto& [q, m] : g.connecting)
        if (m.rows() && m.cols()) conn[std::to_string(q)] = detail::matrix_to_json(m);
    bool exact = g.ses.exact();
    finish(cfg, {{"base_betti", betti_json(cohomology_betti(g.base))},
                 {"betti", betti_json(g.betti)},
                 {"connecting", conn},
                 {"connecting_rank", g.connecting_rank},
                 {"exact", exact}});
    return exact ? 0 : 1;
}

int run_hpl(const JobConfig& cfg)
{
    if (cfg.random > 0) {
        auto seed = seed_from_env();
        std::mt19937_64 rng(seed);
        std::size_t failures = 0;
        for (int i = 0; i < cfg.random; ++i) {
            auto rf = random_filtered_complex(rng);
            GradedComplex small = perturbed_complex(rf.complex, harmonic_data(rf.complex));
            if (!verify_d_squared(small).empty() || cohomology_betti(small) != cohomology_betti(rf.complex) ||
                cohomology_betti(rf.complex) != rf.expected_betti)
                ++failures;
        }
        finish(cfg, {{"seed", seed}, {"count", cfg.random}, {"failures", failures}, {"pass", failures == 0}});
        return failures == 0 ? 0 : 1;
    }
    json j = read_json_file(cfg.input);
    GradedComplex big;
    PerturbationData pd;
    try {
        if (j.contains("blocks")) {
            big = complex_from_json(j);
            pd = j.contains("perturbation") ? perturbation_from_json(j.at("perturbation")) : harmonic_data(big);
        } else {
            big = assemble_differential(document_from_json(j, load_options(cfg)).model);
            pd = harmonic_data(big);
        }
    } catch (const json::exception& e) {
        throw ParseError(cfg.input + ": " + e.what());
    }
    require_complex(big);
    GradedComplex small = perturbed_complex(big, pd);
    Report r = verify_d_squared(small);
    auto b0 = cohomology_betti(big), b1 = cohomology_betti(small);
    bool ok = r.empty() && b0 == b1;
    finish(cfg, {{"dimension_original", big.total_size()},
                 {"dimension_perturbed", small.total_size()},
                 {"betti_original", betti_json(b0)},
                 {"betti_perturbed", betti_json(b1)},
                 {"d_squared", r.empty()},
                 {"quasi_isomorphic", b0 == b1},
                 {"pass", ok}});
    return ok ? 0 : 1;
}

json critical_json(const std::vector<CriticalPoint>& crit)
{
    json a = json::array();
    for (const auto& p : crit)
        a.push_back({{"index", p.index}, {"value", round9(p.value)}, {"x", {round9(p.x[0]), round9(p.x[1]), round9(p.x[2])}}});
    return a;
}

void write_csv(const JobConfig& cfg, const std::vector<FlowLine>& lines)
{
    if (cfg.csv.empty()) return;
    std::ofstream os(cfg.csv);
    if (!os) throw ParseError("cannot write " + cfg.csv);
    write_trajectories_csv(os, lines);
}

void emit_model(const JobConfig& cfg, const Document& d)
{
    if (!cfg.emit.empty()) save_json(cfg.emit, document_to_json(d));
}

int run_demo(const JobConfig& cfg)
{
    json report{{"demo", cfg.demo}};
    bool ok = true;
    if (cfg.demo == "s2-height" || cfg.demo == "t2-tilt") {
        SurfaceModel s = cfg.demo == "s2-height" ? sphere_height() : torus_height();
        MorseBuild b = build_morse(s);
        b.model.name = cfg.demo;
        emit_model(cfg, {b.model});
        write_csv(cfg, b.lines);
        GradedComplex c = assemble_differential(b.model);
        Report d2 = verify_d_squared(c);
        bool lines_ok = true;
        for (const auto& l : b.lines) lines_ok = lines_ok && l.monotone && l.energy_ok(s);
        auto betti = d2.empty() ? cohomology_betti(c) : std::map<int, std::size_t>{};
        ok = d2.empty() && lines_ok && betti == s.betti;
        report["critical_points"] = critical_json(b.critical);
        report["flow_lines"] = b.lines.size();
        report["lines_monotone"] = lines_ok;
        report["d_squared"] = d2.empty();
        report["betti"] = betti_json(betti);
        report["expected_betti"] = betti_json(s.betti);
    } else if (cfg.demo == "s2-bott") {
        CircleDefiningData data;
        FlowCategoryModel fc = s2_bott_model(data);
        auto inner = std::dynamic_pointer_cast<const QuadratureOracle>(std::dynamic_pointer_cast<const BuiltinOracle>(fc.oracle)->inner());
        auto q = std::make_shared<QuadratureOracle>(*inner);
        q->snap_tolerance = cfg.tol;
        fc.oracle = std::make_shared<BuiltinOracle>("s2-bott", json::object(), q);
        emit_model(cfg, {fc});
        json entries = json::array();
        bool near = true;
        for (const auto& [key, chart] : q->charts) {
            PairingValue v = q->evaluate(chart);
            near = near && v.snapped && std::abs(std::abs(v.approx) - 1.0) <= cfg.tol;
            entries.push_back({{"key", key}, {"raw", v.approx}, {"snapped", v.snapped ? format_rational(v.exact) : "none"}});
        }
        GradedComplex c = assemble_differential(fc);
        Report d2 = verify_d_squared(c);
        auto betti = d2.empty() ? cohomology_betti(c) : std::map<int, std::size_t>{};
        std::map<int, std::size_t> expected{{0, 1}, {2, 1}};
        ok = near && d2.empty() && betti == expected;
        report["d1_entries"] = entries;
        report["entries_within_tol"] = near;
        report["d_squared"] = d2.empty();
        report["betti"] = betti_json(betti);
        report["expected_betti"] = betti_json(expected);
    } else if (cfg.demo == "continuation") {
        ContinuationDemo demo = continuation_s2();
        demo.morphism.source.name = "continuation-source";
        demo.morphism.target.name = "continuation-target";
        Document d{demo.morphism.source};
        d.morphism = demo.morphism;
        emit_model(cfg, d);
        std::vector<FlowLine> lines;
        for (const auto& l : demo.lines) lines.push_back({l.from, l.to, l.trajectory, l.sign, 0.0, 0.0, true});
        write_csv(cfg, lines);
        ChainMap f = assemble_morphism_map(demo.morphism);
        Report r = verify_chain_map(f);
        bool iso = r.empty() && induces_isomorphism(f);
        ok = r.empty() && iso;
        report["source_critical_points"] = critical_json(demo.source.critical);
        report["target_critical_points"] = critical_json(demo.target.critical);
        report["continuation_lines"] = demo.lines.size();
        report["chain_map"] = r.empty();
        report["isomorphism"] = iso;
        report["source_betti"] = betti_json(cohomology_betti(f.source));
        report["target_betti"] = betti_json(cohomology_betti(f.target));
        report["induced"] = induced_json(f);
    } else {
        throw ParseError("unknown demo '" + cfg.demo + "'");
    }
    report["pass"] = ok;
    finish(cfg, report);
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"flowcat: Morse-Bott cochain machinery on flow-category models"};
    app.require_subcommand(1);
    JobConfig cfg;
    app.add_option("--out", cfg.out, "write the report to this path as well");
    app.add_option("--tol", cfg.tol, "snapping tolerance for quadrature pairings")->check(CLI::PositiveNumber);
    app.add_flag("--verbose-signs", cfg.verbose_signs, "print the sign trace of every assembled entry");

    auto with_input = [&](CLI::App* sub) {
        sub->add_option("input", cfg.input, "model file")->required();
        return sub;
    };
    with_input(app.add_subcommand("verify", "check d^2 = 0 and every bundled morphism or homotopy identity"));
    with_input(app.add_subcommand("cohomology", "Betti numbers of the assembled complex"));
    auto* ss = with_input(app.add_subcommand("ss", "pages of the action spectral sequence"));
    ss->add_option("--page", cfg.page, "page index r (default: E_infinity)")->check(CLI::PositiveNumber);
    with_input(app.add_subcommand("morphism", "chain map of the morphism section and its induced maps"));
    auto* gy = with_input(app.add_subcommand("gysin", "Gysin sequence of a sphere bundle"));
    gy->add_option("--k", cfg.k, "fiber dimension");
    gy->add_flag("--trivial", cfg.trivial, "use the product bundle with a circle fiber");
    auto* hp = app.add_subcommand("hpl", "homological perturbation of a big complex");
    hp->add_option("input", cfg.input, "complex or model file");
    hp->add_option("--random", cfg.random, "run on N random filtered complexes (seed from FLOWCAT_SEED)");
    auto* demo = app.add_subcommand("demo", "build a geometric example and run the full pipeline");
    demo->add_option("name", cfg.demo, "s2-height, t2-tilt, s2-bott or continuation")
        ->required()
        ->check(CLI::IsMember({"s2-height", "t2-tilt", "s2-bott", "continuation"}));
    demo->add_option("--emit", cfg.emit, "write the built model as JSON");
    demo->add_option("--csv", cfg.csv, "write flow-line trajectories as CSV");
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    if (cfg.command == "hpl" && cfg.input.empty() && cfg.random <= 0) {
        std::cerr << "hpl needs an input file or --random N\n";
        return 2;
    }

    try {
        if (cfg.command == "verify") return run_verify(cfg);
        if (cfg.command == "cohomology") return run_cohomology(cfg);
        if (cfg.command == "ss") return run_ss(cfg);
        if (cfg.command == "morphism") return run_morphism(cfg);
        if (cfg.command == "gysin") return run_gysin(cfg);
        if (cfg.command == "hpl") return run_hpl(cfg);
        return run_demo(cfg);
    } catch (const ParseError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const flowcat_error& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
}
