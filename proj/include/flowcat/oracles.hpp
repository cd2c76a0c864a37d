#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "category.hpp"
#include "oracle.hpp"

namespace flowcat {

constexpr double two_pi = 2.0 * std::numbers::pi;

// Sawtooth primitive on S^1 x S^1, shifted by kappa for the kernel variants.
struct CircleDefiningData {
    double kappa = 0.0;

    std::vector<Generator> basis() const { return {{"1", 0}, {"dtheta", 1}}; }
    // Dual forms as (constant coefficient, form degree): 1 -> dtheta/2pi, dtheta/2pi -> -1.
    std::vector<std::pair<double, int>> duals() const { return {{1.0, 1}, {-1.0, 0}}; }

    double kernel(double theta1, double theta2) const
    {
        double u = std::fmod(theta2 - theta1, two_pi);
        if (u < 0) u += two_pi;
        return 0.5 - u / two_pi + kappa;
    }

    // Value on the diagonal taken as the average of the two one-sided limits.
    double kernel_averaged(double theta1, double theta2) const
    {
        double u = std::fmod(theta2 - theta1, two_pi);
        if (u < 0) u += two_pi;
        if (u == 0.0) return kappa;
        return 0.5 - u / two_pi + kappa;
    }
};

inline double circle_kernel(const CircleDefiningData& d, double theta1, double theta2) { return d.kernel(theta1, theta2); }

// Residual of the homotopy identity on the mode e^{in theta}, with the kernel
// integrals done by the trapezoid rule on `points` nodes and the samples taken
// at nodes. For functions I_f(dg) must equal g - mean(g); for one-forms
// g dtheta, I_f(g dtheta) must be a primitive of g - mean(g) up to a constant.
inline double circle_homotopy_residual(const CircleDefiningData& d, int n, std::size_t points, std::size_t samples = 7)
{
    using cd = std::complex<double>;
    const double h = two_pi / static_cast<double>(points);
    auto trapezoid = [&](double th, const std::function<cd(double)>& g) {
        cd acc(0.0, 0.0);
        for (std::size_t i = 0; i < points; ++i) {
            double tp = h * static_cast<double>(i);
            acc += d.kernel_averaged(tp, th) * g(tp) * h;
        }
        return acc;
    };
    auto mode = [n](double t) { return std::exp(cd(0.0, n * t)); };
    auto dmode = [n](double t) { return cd(0.0, n) * std::exp(cd(0.0, n * t)); };
    double worst = 0.0;
    std::vector<cd> offsets;
    for (std::size_t k = 0; k < samples; ++k) {
        double th = h * static_cast<double>((k * points) / samples);
        cd mean = n == 0 ? cd(1.0, 0.0) : cd(0.0, 0.0);
        worst = std::max(worst, std::abs(trapezoid(th, dmode) - (mode(th) - mean)));
        cd primitive = n == 0 ? cd(0.0, 0.0) : mode(th) / cd(0.0, n);
        offsets.push_back(trapezoid(th, mode) - primitive);
    }
    for (const auto& o : offsets) worst = std::max(worst, std::abs(o - offsets.front()));
    return worst;
}

struct SnapResult {
    Rational value;
    bool snapped = false;
};

inline SnapResult snap_rational(double x, long max_den = 16, double tol = 1e-6)
{
    for (long q = 1; q <= max_den; ++q) {
        double p = std::round(x * static_cast<double>(q));
        if (std::abs(x - p / static_cast<double>(q)) < tol) {
            Rational r(static_cast<long>(p), q);
            r.canonicalize();
            return {r, true};
        }
    }
    return {Rational(0), false};
}

namespace detail {

inline const std::array<std::pair<double, double>, 8>& gauss8()
{
    static const std::array<std::pair<double, double>, 8> nodes = {{
        {-0.9602898564975363, 0.1012285362903763},
        {-0.7966664774136267, 0.2223810344533745},
        {-0.5255324099163290, 0.3137066458778873},
        {-0.1834346424956498, 0.3626837833783620},
        {0.1834346424956498, 0.3626837833783620},
        {0.5255324099163290, 0.3137066458778873},
        {0.7966664774136267, 0.2223810344533745},
        {0.9602898564975363, 0.1012285362903763},
    }};
    return nodes;
}

inline double composite_gauss(const std::function<double(const std::vector<double>&)>& f, std::size_t dim, std::size_t panels,
                              std::vector<double>& x, std::size_t axis)
{
    if (axis == dim) return f(x);
    const double w = 1.0 / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        double a = w * static_cast<double>(p);
        for (const auto& [node, weight] : gauss8()) {
            x[axis] = a + 0.5 * w * (node + 1.0);
            total += 0.5 * w * weight * composite_gauss(f, dim, panels, x, axis + 1);
        }
    }
    return total;
}

} // namespace detail

struct QuadratureResult {
    double value = 0.0;
    double change = 0.0;
    std::size_t panels = 0;
};

// Composite 8-point Gauss-Legendre on [0,1]^dim, doubling the panel count
// until two successive values agree to `tol`.
inline QuadratureResult integrate_cube(const std::function<double(const std::vector<double>&)>& f, std::size_t dim,
                                       double tol = 1e-10, std::size_t max_refinements = 8)
{
    if (dim == 0) return {f({}), 0.0, 0};
    std::vector<double> x(dim, 0.0);
    std::size_t panels = 1;
    double prev = detail::composite_gauss(f, dim, panels, x, 0);
    for (std::size_t r = 0; r < max_refinements; ++r) {
        panels *= 2;
        double cur = detail::composite_gauss(f, dim, panels, x, 0);
        if (std::abs(cur - prev) < tol) return {cur, std::abs(cur - prev), panels};
        prev = cur;
    }
    throw NotConverged("quadrature did not stabilize after " + std::to_string(max_refinements) + " refinements");
}

// Pulled-back top-degree density of a pairing on the parameter cube [0,1]^dim.
struct Chart {
    std::size_t dim = 0;
    std::function<double(const std::vector<double>&)> density;
};

class QuadratureOracle : public PairingOracle {
public:
    std::map<std::string, Chart> charts;
    double tolerance = 1e-10;
    double snap_tolerance = 1e-6;
    long max_denominator = 16;

    void add_chart(const PairingQuery& q, Chart c) { charts[q.key()] = std::move(c); }

    PairingValue query(const PairingQuery& q) const override
    {
        if (vanishes_by_degree(q)) return PairingValue::zero();
        auto it = charts.find(q.key());
        if (it == charts.end()) throw OracleMissingPairing("no chart registered for " + q.key());
        return evaluate(it->second);
    }

    PairingValue evaluate(const Chart& c) const
    {
        auto r = integrate_cube(c.density, c.dim, tolerance);
        auto s = snap_rational(r.value, max_denominator, snap_tolerance);
        PairingValue v;
        v.approx = r.value;
        v.snapped = s.snapped;
        v.is_exact = s.snapped;
        v.exact = s.value;
        return v;
    }

    std::string name() const override { return "quadrature"; }
};

// Pairing of the circle kernel between basis elements of H*(S^1): the entry
// (i, j) integrates basis_i(theta1) f(theta1, theta2) dual_j(theta2) over the torus.
inline QMatrix circle_kernel_factor(const CircleDefiningData& d)
{
    auto basis = d.basis();
    auto duals = d.duals();
    QMatrix out(basis.size(), basis.size());
    for (std::size_t i = 0; i < basis.size(); ++i)
        for (std::size_t j = 0; j < basis.size(); ++j) {
            if (basis[i].degree + duals[j].second != 2) continue;
            double coef = duals[j].first;
            Chart c{2, [&, coef](const std::vector<double>& x) {
                        return coef * d.kernel_averaged(two_pi * x[0], two_pi * x[1]);
                    }};
            auto r = integrate_cube(c.density, 2, 1e-9, 10);
            auto s = snap_rational(r.value);
            if (!s.snapped) throw NotConverged("kernel factor did not snap");
            out(i, j) = s.value;
        }
    return out;
}

inline ManifoldFactor circle_factor(const CircleDefiningData& d = {})
{
    return {"S1", 1, d.basis(), circle_kernel_factor(d)};
}

// A pairing with one kernel factor on a circle-fibered chart (theta1, u):
// integrand f(theta1, theta1 + 2 pi u) * u.
inline Chart kernel_triple_chart(const CircleDefiningData& d)
{
    return {2, [d](const std::vector<double>& x) {
                double t1 = two_pi * x[0];
                return d.kernel(t1, t1 + two_pi * x[1]) * x[1];
            }};
}

// Adaptive Simpson integration, used as an independent cross-check.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 40)
{
    auto simpson = [&](double l, double r, double fl, double fm, double fr) { return (r - l) / 6.0 * (fl + 4 * fm + fr); };
    std::function<double(double, double, double, double, double, double, double, int)> rec =
        [&](double l, double r, double fl, double fm, double fr, double whole, double eps, int d) -> double {
        double m = 0.5 * (l + r);
        double lm = 0.5 * (l + m), rm = 0.5 * (m + r);
        double flm = f(lm), frm = f(rm);
        double left = simpson(l, m, fl, flm, fm), right = simpson(m, r, fm, frm, fr);
        if (d <= 0 || std::abs(left + right - whole) <= 15 * eps) return left + right + (left + right - whole) / 15.0;
        return rec(l, m, fl, flm, fm, left, eps / 2, d - 1) + rec(m, r, fm, frm, fr, right, eps / 2, d - 1);
    };
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return rec(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, depth);
}

} // namespace flowcat
