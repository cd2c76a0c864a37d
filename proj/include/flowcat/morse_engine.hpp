#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "category.hpp"
#include "oracles.hpp"

namespace flowcat {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) { return (1.0 / norm(a)) * a; }

struct SurfaceChart {
    std::string name;
    std::function<Vec3(double, double)> map;
    std::function<std::array<Vec3, 2>(double, double)> jacobian;
    std::array<double, 2> lo{};
    std::array<double, 2> hi{};
};

struct SurfaceModel {
    std::string name;
    std::vector<SurfaceChart> atlas;
    std::function<double(const Vec3&)> f;
    std::function<Vec3(const Vec3&)> grad_ambient;
    std::function<Vec3(const Vec3&)> normal;
    std::function<Vec3(const Vec3&)> project;
    std::map<int, std::size_t> betti;
    std::vector<Generator> cohomology;
    bool morse_bott_builtin = false;

    Vec3 gradient(const Vec3& x) const
    {
        Vec3 g = grad_ambient(x);
        Vec3 n = normal(x);
        return g - dot(g, n) * n;
    }
};

namespace detail {

inline std::vector<SurfaceChart> stereographic_atlas()
{
    auto chart = [](double pole) {
        SurfaceChart c;
        c.name = pole > 0 ? "from-north" : "from-south";
        c.map = [pole](double u, double v) {
            double r = u * u + v * v, d = 1.0 + r;
            return Vec3{2 * u / d, 2 * v / d, pole * (r - 1) / d};
        };
        c.jacobian = [pole](double u, double v) {
            double r = u * u + v * v, d = 1.0 + r, d2 = d * d;
            Vec3 du{2 * (d - 2 * u * u) / d2, -4 * u * v / d2, pole * 4 * u / d2};
            Vec3 dv{-4 * u * v / d2, 2 * (d - 2 * v * v) / d2, pole * 4 * v / d2};
            return std::array<Vec3, 2>{du, dv};
        };
        c.lo = {-1.5, -1.5};
        c.hi = {1.5, 1.5};
        return c;
    };
    return {chart(1.0), chart(-1.0)};
}

inline void sphere_geometry(SurfaceModel& s)
{
    s.atlas = stereographic_atlas();
    s.normal = [](const Vec3& x) { return normalized(x); };
    s.project = [](const Vec3& x) { return normalized(x); };
    s.betti = {{0, 1}, {2, 1}};
    s.cohomology = {{"1", 0}, {"vol", 2}};
}

} // namespace detail

inline SurfaceModel sphere_height(Vec3 tilt = {0.0, 0.0, 1.0})
{
    SurfaceModel s;
    Vec3 w = normalized(tilt);
    s.name = "s2-height";
    detail::sphere_geometry(s);
    s.f = [w](const Vec3& x) { return dot(w, x); };
    s.grad_ambient = [w](const Vec3&) { return w; };
    return s;
}

inline SurfaceModel sphere_z_squared()
{
    SurfaceModel s;
    s.name = "s2-z2";
    detail::sphere_geometry(s);
    s.f = [](const Vec3& x) { return x[2] * x[2]; };
    s.grad_ambient = [](const Vec3& x) { return Vec3{0.0, 0.0, 2 * x[2]}; };
    s.morse_bott_builtin = true;
    return s;
}

inline SurfaceModel sphere_constant(double value = 0.0)
{
    SurfaceModel s;
    s.name = "s2-constant";
    detail::sphere_geometry(s);
    s.f = [value](const Vec3&) { return value; };
    s.grad_ambient = [](const Vec3&) { return Vec3{0.0, 0.0, 0.0}; };
    return s;
}

// Torus of revolution around the z axis, f = height in the direction `tilt`.
inline SurfaceModel torus_height(double R = 2.0, double r = 1.0, Vec3 tilt = {1.0, 0.05, 0.2})
{
    SurfaceModel s;
    Vec3 w = normalized(tilt);
    s.name = "t2-tilt";
    SurfaceChart c;
    c.name = "angles";
    c.map = [R, r](double phi, double psi) {
        double rho = R + r * std::cos(psi);
        return Vec3{rho * std::cos(phi), rho * std::sin(phi), r * std::sin(psi)};
    };
    c.jacobian = [R, r](double phi, double psi) {
        double rho = R + r * std::cos(psi);
        Vec3 dphi{-rho * std::sin(phi), rho * std::cos(phi), 0.0};
        Vec3 dpsi{-r * std::sin(psi) * std::cos(phi), -r * std::sin(psi) * std::sin(phi), r * std::cos(psi)};
        return std::array<Vec3, 2>{dphi, dpsi};
    };
    c.lo = {0.0, 0.0};
    c.hi = {two_pi, two_pi};
    s.atlas = {c};
    auto center = [R](const Vec3& x) {
        double phi = std::atan2(x[1], x[0]);
        return Vec3{R * std::cos(phi), R * std::sin(phi), 0.0};
    };
    s.normal = [center](const Vec3& x) { return normalized(x - center(x)); };
    s.project = [center, r](const Vec3& x) {
        Vec3 c0 = center(x);
        return c0 + r * normalized(x - c0);
    };
    s.f = [w](const Vec3& x) { return dot(w, x); };
    s.grad_ambient = [w](const Vec3&) { return w; };
    s.betti = {{0, 1}, {1, 2}, {2, 1}};
    s.cohomology = {{"1", 0}, {"a", 1}, {"b", 1}, {"vol", 2}};
    return s;
}

struct CriticalPoint {
    std::size_t chart = 0;
    std::array<double, 2> uv{};
    Vec3 x{};
    int index = 0;
    double value = 0.0;
    double gradient_norm = 0.0;
    double min_abs_eig = 0.0;
    bool degenerate = false;
    // Eigen-directions in ambient space: `up` has positive Hessian eigenvalues,
    // `down` negative ones, each with a fixed orientation.
    std::vector<Vec3> up;
    std::vector<Vec3> down;
};

struct EngineConfig {
    double h_min = 1e-4;
    double h_max = 1e-2;
    double step_tol = 1e-10;
    double arrival_radius = 1e-3;
    double start_offset = 1e-5;
    std::size_t max_steps = 400000;
    std::size_t seeds_per_axis = 16;
    double newton_tol = 1e-13;
    double degenerate_tol = 1e-6;
    double dedupe = 1e-6;
};

namespace detail {

inline std::array<double, 2> chart_gradient(const SurfaceModel& s, const SurfaceChart& c, double u, double v)
{
    auto j = c.jacobian(u, v);
    Vec3 g = s.grad_ambient(c.map(u, v));
    return {dot(j[0], g), dot(j[1], g)};
}

inline std::array<std::array<double, 2>, 2> chart_hessian(const SurfaceModel& s, const SurfaceChart& c, double u, double v)
{
    const double h = 1e-5;
    auto gu1 = chart_gradient(s, c, u + h, v), gu0 = chart_gradient(s, c, u - h, v);
    auto gv1 = chart_gradient(s, c, u, v + h), gv0 = chart_gradient(s, c, u, v - h);
    double huu = (gu1[0] - gu0[0]) / (2 * h);
    double hvv = (gv1[1] - gv0[1]) / (2 * h);
    double huv = 0.5 * ((gu1[1] - gu0[1]) / (2 * h) + (gv1[0] - gv0[0]) / (2 * h));
    return {{{huu, huv}, {huv, hvv}}};
}

inline Vec3 oriented(Vec3 v)
{
    std::size_t k = 0;
    for (std::size_t i = 1; i < 3; ++i)
        if (std::abs(v[i]) > std::abs(v[k]) + 1e-9) k = i;
    return v[k] < 0 ? -1.0 * v : v;
}

// Eigenpairs of the Hessian relative to the metric, as ambient unit vectors.
inline void classify(const SurfaceModel& s, CriticalPoint& p, double degenerate_tol)
{
    const auto& c = s.atlas[p.chart];
    auto j = c.jacobian(p.uv[0], p.uv[1]);
    double g11 = dot(j[0], j[0]), g12 = dot(j[0], j[1]), g22 = dot(j[1], j[1]);
    auto H = chart_hessian(s, c, p.uv[0], p.uv[1]);
    // det(H - l G) = 0
    double a = g11 * g22 - g12 * g12;
    double b = -(H[0][0] * g22 + H[1][1] * g11 - 2 * H[0][1] * g12);
    double cc = H[0][0] * H[1][1] - H[0][1] * H[0][1];
    double disc = std::max(0.0, b * b - 4 * a * cc);
    double l1 = (-b - std::sqrt(disc)) / (2 * a), l2 = (-b + std::sqrt(disc)) / (2 * a);
    p.min_abs_eig = std::min(std::abs(l1), std::abs(l2));
    p.degenerate = p.min_abs_eig < degenerate_tol;
    p.index = (l1 < 0 ? 1 : 0) + (l2 < 0 ? 1 : 0);
    p.up.clear();
    p.down.clear();
    for (double l : {l1, l2}) {
        double m00 = H[0][0] - l * g11, m01 = H[0][1] - l * g12, m11 = H[1][1] - l * g22;
        std::array<double, 2> e = std::abs(m00) + std::abs(m01) > std::abs(m01) + std::abs(m11)
                                      ? std::array<double, 2>{-m01, m00}
                                      : std::array<double, 2>{m11, -m01};
        if (std::abs(e[0]) + std::abs(e[1]) < 1e-14) e = {1.0, 0.0};
        Vec3 amb = oriented(normalized(e[0] * j[0] + e[1] * j[1]));
        if (l > 0) p.up.push_back(amb);
        else if (l < 0) p.down.push_back(amb);
    }
}

} // namespace detail

// Grid seeding in every chart, Newton polish on the chart gradient, and
// de-duplication in ambient space.
inline std::vector<CriticalPoint> find_critical_points(const SurfaceModel& s, const EngineConfig& cfg = {})
{
    std::vector<CriticalPoint> out;
    for (std::size_t ci = 0; ci < s.atlas.size(); ++ci) {
        const auto& c = s.atlas[ci];
        const std::size_t n = cfg.seeds_per_axis;
        for (std::size_t iu = 0; iu < n; ++iu)
            for (std::size_t iv = 0; iv < n; ++iv) {
                double u = c.lo[0] + (c.hi[0] - c.lo[0]) * (static_cast<double>(iu) + 0.5) / static_cast<double>(n);
                double v = c.lo[1] + (c.hi[1] - c.lo[1]) * (static_cast<double>(iv) + 0.5) / static_cast<double>(n);
                bool ok = false;
                for (int it = 0; it < 60; ++it) {
                    auto g = detail::chart_gradient(s, c, u, v);
                    if (std::hypot(g[0], g[1]) < cfg.newton_tol) {
                        ok = true;
                        break;
                    }
                    auto H = detail::chart_hessian(s, c, u, v);
                    double det = H[0][0] * H[1][1] - H[0][1] * H[1][0];
                    if (std::abs(det) < 1e-14) {
                        ok = std::hypot(g[0], g[1]) < 1e-10;
                        break;
                    }
                    double du = -(H[1][1] * g[0] - H[0][1] * g[1]) / det;
                    double dv = -(-H[1][0] * g[0] + H[0][0] * g[1]) / det;
                    double step = std::hypot(du, dv);
                    if (step > 0.5) {
                        du *= 0.5 / step;
                        dv *= 0.5 / step;
                    }
                    u += du;
                    v += dv;
                    if (std::abs(u) > 1e3 || std::abs(v) > 1e3) break;
                }
                if (!ok) {
                    auto g = detail::chart_gradient(s, c, u, v);
                    ok = std::isfinite(u) && std::isfinite(v) && std::hypot(g[0], g[1]) < 1e-10;
                }
                if (!ok) continue;
                if (u * u + v * v > 16.0 && c.name != "angles") continue;
                CriticalPoint p;
                p.chart = ci;
                p.uv = {u, v};
                p.x = c.map(u, v);
                p.value = s.f(p.x);
                p.gradient_norm = norm(s.gradient(p.x));
                if (p.gradient_norm >= 1e-10) continue;
                bool dup = false;
                for (const auto& q : out)
                    if (norm(q.x - p.x) < cfg.dedupe) dup = true;
                if (dup) continue;
                detail::classify(s, p, cfg.degenerate_tol);
                if (p.degenerate && !s.morse_bott_builtin)
                    throw DegenerateCritical("degenerate critical point on " + s.name + " (min |eig| = " + std::to_string(p.min_abs_eig) + ")");
                out.push_back(p);
            }
    }
    std::stable_sort(out.begin(), out.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
        if (a.value != b.value) return a.value < b.value;
        return a.x < b.x;
    });
    return out;
}

struct FlowLine {
    std::size_t from = 0;
    std::size_t to = 0;
    std::vector<Vec3> trajectory;
    int sign = 1;
    double arc_length = 0.0;
    double min_gradient = 0.0;
    bool monotone = true;

    bool energy_ok(const SurfaceModel& s) const
    {
        double df = s.f(trajectory.back()) - s.f(trajectory.front());
        return arc_length <= df / min_gradient * (1 + 1e-9);
    }
};

struct Trajectory {
    std::vector<Vec3> points;
    std::optional<std::size_t> arrived;
    bool monotone = true;
};

namespace detail {

inline Vec3 rk4_step(const std::function<Vec3(const Vec3&)>& field, const std::function<Vec3(const Vec3&)>& project, const Vec3& x,
                     double h)
{
    Vec3 k1 = field(x);
    Vec3 k2 = field(project(x + (0.5 * h) * k1));
    Vec3 k3 = field(project(x + (0.5 * h) * k2));
    Vec3 k4 = field(project(x + h * k3));
    return project(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

} // namespace detail

// Integrates direction * grad f from x0 with step doubling until the path
// enters the arrival disk of a critical point other than `start`.
inline Trajectory integrate_flow(const SurfaceModel& s, const std::vector<CriticalPoint>& crit, std::size_t start, const Vec3& x0,
                                 double direction, const EngineConfig& cfg)
{
    auto field = [&](const Vec3& x) { return direction * s.gradient(x); };
    Trajectory t;
    Vec3 x = s.project(x0);
    t.points.push_back(x);
    double h = cfg.h_min;
    bool left = start >= crit.size();
    for (std::size_t step = 0; step < cfg.max_steps; ++step) {
        Vec3 full = detail::rk4_step(field, s.project, x, h);
        Vec3 half = detail::rk4_step(field, s.project, detail::rk4_step(field, s.project, x, 0.5 * h), 0.5 * h);
        double err = norm(full - half);
        if (err > cfg.step_tol && h > cfg.h_min) {
            h = std::max(cfg.h_min, 0.5 * h);
            continue;
        }
        if (direction * (s.f(half) - s.f(x)) <= 0) t.monotone = false;
        x = half;
        t.points.push_back(x);
        if (err < 0.1 * cfg.step_tol) h = std::min(cfg.h_max, 2 * h);
        if (!left && norm(x - crit[start].x) > 2 * cfg.arrival_radius) left = true;
        for (std::size_t i = 0; i < crit.size(); ++i) {
            if (i == start && !left) continue;
            if (norm(x - crit[i].x) < cfg.arrival_radius) {
                t.arrived = i;
                return t;
            }
        }
    }
    return t;
}

namespace detail {

inline FlowLine to_flow_line(const SurfaceModel& s, std::vector<Vec3> pts, std::size_t from, std::size_t to, int sign)
{
    FlowLine fl;
    fl.from = from;
    fl.to = to;
    fl.sign = sign;
    fl.min_gradient = 1e300;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        fl.min_gradient = std::min(fl.min_gradient, norm(s.gradient(pts[i])));
        if (i > 0) {
            fl.arc_length += norm(pts[i] - pts[i - 1]);
            if (s.f(pts[i]) <= s.f(pts[i - 1])) fl.monotone = false;
        }
    }
    fl.trajectory = std::move(pts);
    return fl;
}

} // namespace detail

// All rigid lines leaving or entering the index-1 point p: the two branches of
// its one-dimensional unstable (upward) or stable (downward) manifold.
inline std::vector<FlowLine> saddle_branches(const SurfaceModel& s, const std::vector<CriticalPoint>& crit, std::size_t p, bool upward,
                                             const EngineConfig& cfg = {})
{
    const auto& cp = crit.at(p);
    if (cp.index != 1) return {};
    const Vec3 e = upward ? cp.up.at(0) : cp.down.at(0);
    std::vector<FlowLine> out;
    for (double side : {1.0, -1.0}) {
        Vec3 x0 = cp.x + (side * cfg.start_offset) * e;
        auto tr = integrate_flow(s, crit, p, x0, upward ? 1.0 : -1.0, cfg);
        if (!tr.arrived) throw NotConverged("branch from critical point " + std::to_string(p) + " did not arrive");
        std::size_t q = *tr.arrived;
        if (crit[q].index == 1) throw NonTransverse("branch from " + std::to_string(p) + " arrives at index-1 point " + std::to_string(q));
        if (!tr.monotone) throw NotConverged("f is not monotone along a branch from " + std::to_string(p));
        tr.points.insert(tr.points.begin(), cp.x);
        tr.points.push_back(crit[q].x);
        int sign = 1;
        if (upward) {
            // unstable frame of p followed by the outgoing direction against the surface orientation
            Vec3 n = s.normal(cp.x);
            sign = dot(n, cross(side * e, cp.down.at(0))) > 0 ? 1 : -1;
            out.push_back(detail::to_flow_line(s, tr.points, p, q, sign));
        } else {
            sign = side > 0 ? 1 : -1;
            std::reverse(tr.points.begin(), tr.points.end());
            out.push_back(detail::to_flow_line(s, tr.points, q, p, sign));
        }
    }
    return out;
}

struct OrbitCount {
    std::vector<FlowLine> lines;
    int net = 0;
};

inline OrbitCount count_connecting_orbits(const SurfaceModel& s, const std::vector<CriticalPoint>& crit, std::size_t from,
                                          std::size_t to, const EngineConfig& cfg = {})
{
    OrbitCount oc;
    if (crit.at(to).index - crit.at(from).index != 1) return oc;
    std::vector<FlowLine> cand = crit[to].index == 1 ? saddle_branches(s, crit, to, false, cfg) : saddle_branches(s, crit, from, true, cfg);
    for (auto& fl : cand)
        if (fl.from == from && fl.to == to) {
            oc.net += fl.sign;
            oc.lines.push_back(std::move(fl));
        }
    return oc;
}

struct MorseBuild {
    FlowCategoryModel model;
    std::vector<CriticalPoint> critical;
    std::vector<std::pair<int, std::size_t>> position;
    std::vector<FlowLine> lines;
};

inline bool is_constant(const SurfaceModel& s, const EngineConfig& cfg)
{
    for (const auto& c : s.atlas)
        for (std::size_t i = 0; i < cfg.seeds_per_axis; ++i)
            for (std::size_t j = 0; j < cfg.seeds_per_axis; ++j) {
                double u = c.lo[0] + (c.hi[0] - c.lo[0]) * (static_cast<double>(i) + 0.5) / static_cast<double>(cfg.seeds_per_axis);
                double v = c.lo[1] + (c.hi[1] - c.lo[1]) * (static_cast<double>(j) + 0.5) / static_cast<double>(cfg.seeds_per_axis);
                if (norm(s.gradient(c.map(u, v))) > 1e-12) return false;
            }
    return true;
}

inline MorseBuild build_morse(const SurfaceModel& s, const EngineConfig& cfg = {})
{
    MorseBuild b;
    b.model.name = s.name;
    if (is_constant(s, cfg)) {
        LevelSpec l;
        l.c = 2;
        l.grading = 0;
        l.gens = s.cohomology;
        b.model.levels[0] = l;
        return b;
    }
    b.critical = find_critical_points(s, cfg);
    for (const auto& p : b.critical)
        if (p.degenerate) throw DegenerateCritical(s.name + " has degenerate critical points; use the Morse-Bott model");
    int level = -1;
    double last = 0.0;
    std::map<int, std::size_t> fill;
    for (std::size_t i = 0; i < b.critical.size(); ++i) {
        const auto& p = b.critical[i];
        if (level < 0 || std::abs(p.value - last) > 1e-8) {
            ++level;
            last = p.value;
            LevelSpec l;
            l.c = 0;
            l.grading = p.index;
            b.model.levels[level] = l;
        }
        auto& l = b.model.levels[level];
        if (*l.grading != p.index) throw InvalidModel("critical points of different index share the value " + std::to_string(p.value));
        l.gens.push_back({"x" + std::to_string(i), 0});
        b.position.push_back({level, fill[level]++});
    }
    for (const auto& [i, li] : b.model.levels)
        for (const auto& [j, lj] : b.model.levels)
            if (i < j && *lj.grading > *li.grading) b.model.moduli[{i, j}] = *lj.grading - *li.grading - 1;
    auto oracle = std::make_shared<MorseCountOracle>();
    for (std::size_t p = 0; p < b.critical.size(); ++p) {
        if (b.critical[p].index != 1) continue;
        for (bool up : {false, true})
            for (auto& fl : saddle_branches(s, b.critical, p, up, cfg)) {
                auto [li, ai] = b.position[fl.from];
                auto [lj, aj] = b.position[fl.to];
                auto& m = oracle->counts[{li, lj}];
                if (m.rows() == 0) m = QMatrix(b.model.levels[li].gens.size(), b.model.levels[lj].gens.size());
                m(ai, aj) += fl.sign;
                b.lines.push_back(std::move(fl));
            }
    }
    b.model.oracle = oracle;
    return b;
}

inline FlowCategoryModel build_morse_flow_category(const SurfaceModel& s, const EngineConfig& cfg = {})
{
    return build_morse(s, cfg).model;
}

// Net signed counts between critical points, keyed by (from, to) in the
// value-sorted critical point list.
inline std::map<std::pair<std::size_t, std::size_t>, int> net_counts(const MorseBuild& b)
{
    std::map<std::pair<std::size_t, std::size_t>, int> out;
    for (const auto& fl : b.lines) out[{fl.from, fl.to}] += fl.sign;
    return out;
}

struct EquatorOrientation {
    double north = 0.0;
    double south = 0.0;
};

// Sign of (flow direction, equator direction) against the outward normal
// at the equator point of angle theta, for the line towards each pole.
inline EquatorOrientation equator_orientation(const SurfaceModel& s, double theta)
{
    Vec3 p{std::cos(theta), std::sin(theta), 0.0};
    Vec3 et{-std::sin(theta), std::cos(theta), 0.0};
    EquatorOrientation o;
    for (double side : {1.0, -1.0}) {
        Vec3 q = s.project(p + Vec3{0.0, 0.0, side * 1e-3});
        Vec3 v = normalized(s.gradient(q));
        double e = dot(s.normal(p), cross(v, et)) > 0 ? 1.0 : -1.0;
        (side > 0 ? o.north : o.south) = e;
    }
    return o;
}

// f = z^2 on the round sphere: the equator circle below two isolated poles.
inline FlowCategoryModel build_morsebott_s2_example(const CircleDefiningData& data = {})
{
    SurfaceModel s = sphere_z_squared();
    FlowCategoryModel fc;
    fc.name = "s2-bott";
    LevelSpec eq;
    eq.c = 1;
    eq.grading = 0;
    eq.gens = data.basis();
    LevelSpec poles;
    poles.c = 0;
    poles.grading = 2;
    poles.gens = {{"N", 0}, {"S", 0}};
    fc.levels[0] = eq;
    fc.levels[1] = poles;
    fc.moduli[{0, 1}] = 1;
    auto q = std::make_shared<QuadratureOracle>();
    for (std::size_t b = 0; b < 2; ++b) {
        PairingQuery pq;
        pq.kind = PairingKind::category;
        pq.segments = {{'C', 0, 1}};
        pq.a = 1;
        pq.b = b;
        // pulled back along theta = 2 pi u, dtheta/2pi becomes du
        q->add_chart(pq, Chart{1, [s, b](const std::vector<double>& x) {
                                  auto o = equator_orientation(s, two_pi * x[0]);
                                  return b == 0 ? o.north : o.south;
                              }});
    }
    fc.oracle = q;
    return fc;
}

// Raw quadrature values of the two d_1 entries out of dtheta/2pi, before snapping.
inline std::vector<double> morsebott_raw_values(const FlowCategoryModel& fc)
{
    auto q = std::dynamic_pointer_cast<const QuadratureOracle>(fc.oracle);
    if (!q) throw InvalidModel("model has no quadrature oracle");
    std::vector<double> out;
    for (const auto& [key, chart] : q->charts) out.push_back(q->evaluate(chart).approx);
    return out;
}

struct DiracCheck {
    double fiber = 0.0;
    std::vector<double> inserted;
    int sign_exponent = 0;
};

// The pairing of a one-form a(theta) dtheta/2pi along a moduli circle whose
// source map is the identity, computed directly and with the diagonal
// replaced by rho_n(theta1 - theta2) d(theta1 - theta2) for growing n.
inline DiracCheck dirac_consistency(const std::function<double(double)>& a, const std::vector<int>& widths = {8, 16, 32, 64})
{
    DiracCheck r;
    r.sign_exponent = 1;
    r.fiber = integrate_cube([&](const std::vector<double>& x) { return a(two_pi * x[0]); }, 1).value;
    for (int n : widths) {
        auto rho = [n](double t) {
            double s = std::remainder(t, 1.0) * n;
            if (std::abs(s) >= 1.0) return 0.0;
            return n * 15.0 / 16.0 * (1 - s * s) * (1 - s * s);
        };
        // a(t1) dt1 ^ rho(t1 - t2) (dt1 - dt2) = -a(t1) rho(t1 - t2) dt1 ^ dt2, in units of the circle
        double v = 0.0;
        const int panels = 16 * n;
        for (int i = 0; i < panels; ++i) {
            double lo = static_cast<double>(i) / panels, w = 1.0 / panels;
            for (const auto& [t, wt] : detail::gauss8()) {
                double u2 = lo + 0.5 * w * (t + 1);
                double inner = 0.0;
                for (int k = i - 17; k <= i + 17; ++k) {
                    double lo1 = static_cast<double>(k) / panels;
                    for (const auto& [t1, wt1] : detail::gauss8()) {
                        double u1 = lo1 + 0.5 * w * (t1 + 1);
                        double r0 = rho(u1 - u2);
                        if (r0 != 0.0) inner += 0.5 * w * wt1 * (-a(two_pi * u1) * r0);
                    }
                }
                v += 0.5 * w * wt * inner;
            }
        }
        r.inserted.push_back(v);
    }
    return r;
}

struct ContinuationLine {
    std::size_t from = 0;
    std::size_t to = 0;
    std::vector<Vec3> trajectory;
    int sign = 1;
};

struct ContinuationDemo {
    MorseBuild source;
    MorseBuild target;
    FlowMorphismModel morphism;
    std::vector<ContinuationLine> lines;
};

namespace detail {

inline double smooth_step(double s)
{
    if (s <= -1) return 0.0;
    if (s >= 1) return 1.0;
    double t = 0.5 * (s + 1);
    return t * t * t * (10 - 15 * t + 6 * t * t);
}

} // namespace detail

// Continuation between the height functions along w0 and w1 on the round
// sphere: the s-dependent flow of (1 - beta(s)) f0 + beta(s) f1.
inline ContinuationDemo continuation_s2(Vec3 w0 = {0.0, 0.0, 1.0}, Vec3 w1 = {0.3, 0.2, 1.0}, const EngineConfig& cfg = {})
{
    SurfaceModel s0 = sphere_height(w0), s1 = sphere_height(w1);
    ContinuationDemo demo;
    demo.source = build_morse(s0, cfg);
    demo.target = build_morse(s1, cfg);
    auto field = [&](double s, const Vec3& x) {
        double b = detail::smooth_step(s);
        return (1 - b) * s0.gradient(x) + b * s1.gradient(x);
    };
    auto integrate = [&](Vec3 x, double s, double ds) {
        std::vector<Vec3> pts{x};
        for (int i = 0; i < static_cast<int>(2.0 / std::abs(ds)); ++i) {
            Vec3 k1 = field(s, x);
            Vec3 k2 = field(s + 0.5 * ds, s0.project(x + (0.5 * ds) * k1));
            Vec3 k3 = field(s + 0.5 * ds, s0.project(x + (0.5 * ds) * k2));
            Vec3 k4 = field(s + ds, s0.project(x + ds * k3));
            x = s0.project(x + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
            s += ds;
            pts.push_back(x);
        }
        return pts;
    };
    const auto& C = demo.source;
    const auto& D = demo.target;
    auto oracle = std::make_shared<TabulatedOracle>();
    for (std::size_t i = 0; i < C.critical.size(); ++i)
        for (std::size_t j = 0; j < D.critical.size(); ++j) {
            const auto& x = C.critical[i];
            const auto& y = D.critical[j];
            if (x.index != y.index) continue;
            if (x.index == 1) throw InvalidModel("continuation lines are traced for extremal points only");
            std::vector<Vec3> pts;
            std::optional<std::size_t> end;
            if (x.index == 0) {
                // backwards from the minimum of f1 through the interpolation, then down f0
                pts = integrate(y.x, 1.0, -cfg.h_max);
                auto tail = integrate_flow(s0, C.critical, C.critical.size(), pts.back(), -1.0, cfg);
                end = tail.arrived;
                pts.insert(pts.end(), tail.points.begin(), tail.points.end());
                std::reverse(pts.begin(), pts.end());
                if (end != i) continue;
            } else {
                pts = integrate(x.x, -1.0, cfg.h_max);
                auto tail = integrate_flow(s1, D.critical, D.critical.size(), pts.back(), 1.0, cfg);
                end = tail.arrived;
                pts.insert(pts.end(), tail.points.begin(), tail.points.end());
                if (end != j) continue;
            }
            demo.lines.push_back({i, j, pts, 1});
            auto [li, ai] = C.position[i];
            auto [lj, aj] = D.position[j];
            PairingQuery q;
            q.kind = PairingKind::morphism;
            q.segments = {{'H', li, lj}};
            q.a = ai;
            q.b = aj;
            auto it = oracle->table.find(q.key());
            Rational prev = it == oracle->table.end() ? Rational(0) : it->second;
            oracle->set(PairingKind::morphism, {{'H', li, lj}}, ai, aj, prev + 1);
        }
    FlowMorphismModel& fm = demo.morphism;
    fm.source = C.model;
    fm.target = D.model;
    fm.cutoff = 0;
    for (const auto& [i, li] : C.model.levels)
        for (const auto& [j, lj] : D.model.levels) {
            int h = *lj.grading - *li.grading;
            if (h >= 0 && i - j <= fm.cutoff) fm.dims[{i, j}] = h;
        }
    fm.oracle = oracle;
    return demo;
}

inline void write_trajectories_csv(std::ostream& os, const std::vector<FlowLine>& lines)
{
    os << "line,from,to,sign,step,x,y,z\n";
    for (std::size_t l = 0; l < lines.size(); ++l)
        for (std::size_t k = 0; k < lines[l].trajectory.size(); ++k) {
            const auto& p = lines[l].trajectory[k];
            os << l << ',' << lines[l].from << ',' << lines[l].to << ',' << lines[l].sign << ',' << k << ',' << p[0] << ',' << p[1] << ','
               << p[2] << '\n';
        }
}

} // namespace flowcat
