#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "donsker/accumulators.hpp"
#include "donsker/path_view.hpp"
#include "donsker/walk.hpp"

namespace donsker {

struct MeasureAtom {
    double t = 0.0;
    double w = 0.0;
};

// Atomic Radon measure on [0,1]. Every Frechet derivative handled here
// (cylindrical, max, sup-norm and their compositions) is of this form, which
// keeps the double integral against Gamma[X_n(s), X_n(t)] an exact finite sum.
struct DiscreteMeasure {
    std::vector<MeasureAtom> atoms;  // times nondecreasing

    double total_mass() const {
        double m = 0.0;
        for (const auto& a : atoms) m += std::abs(a.w);
        return m;
    }
};

inline DiscreteMeasure make_measure(std::vector<MeasureAtom> atoms) {
    std::sort(atoms.begin(), atoms.end(),
              [](const MeasureAtom& a, const MeasureAtom& b) { return a.t < b.t; });
    return DiscreteMeasure{std::move(atoms)};
}

// F(x) = f(x(t_1), ..., x(t_p)) with smooth f and explicit gradient.
struct CylindricalFunctional {
    std::vector<double> times;  // strictly increasing, in [0,1]
    std::function<double(std::span<const double>)> f;
    std::function<std::vector<double>(std::span<const double>)> grad_f;
};

// Central-difference check of grad_f against f on a few deterministic smooth
// test points; throws on mismatch.
inline void validate_gradient(const CylindricalFunctional& cyl,
                              double step = 1e-5, double tol = 1e-6) {
    const std::size_t p = cyl.times.size();
    std::vector<std::vector<double>> points;
    points.emplace_back(p, 0.0);
    std::vector<double> alt(p), ramp(p);
    for (std::size_t i = 0; i < p; ++i) {
        alt[i] = (i % 2 == 0) ? 0.7 : -0.4;
        ramp[i] = -0.5 + 0.3 * static_cast<double>(i % 5);
    }
    points.push_back(alt);
    points.push_back(ramp);

    std::vector<double> shifted(p);
    for (const auto& x : points) {
        const std::vector<double> g = cyl.grad_f(x);
        if (g.size() != p)
            throw std::invalid_argument("validate_gradient: gradient dimension mismatch");
        for (std::size_t i = 0; i < p; ++i) {
            shifted = x;
            shifted[i] = x[i] + step;
            const double up = cyl.f(shifted);
            shifted[i] = x[i] - step;
            const double dn = cyl.f(shifted);
            const double fd = (up - dn) / (2.0 * step);
            if (std::abs(fd - g[i]) > tol * std::max(1.0, std::abs(g[i])))
                throw std::invalid_argument("validate_gradient: grad_f does not match f at component " +
                                            std::to_string(i));
        }
    }
}

// A functional of a grid path, with its derivative as an atomic measure.
// Both the walk paths and the Brownian grids are evaluated through PathView,
// so one functional serves the prelimit and the limit side.
struct PathFunctional {
    std::string name;
    std::function<double(const PathView&)> value;
    std::function<DiscreteMeasure(const PathView&)> derivative;
    double lipschitz_bound = std::numeric_limits<double>::infinity();
};

inline PathFunctional make_cylindrical(CylindricalFunctional cyl,
                                       double lipschitz_bound = std::numeric_limits<double>::infinity(),
                                       std::string name = "cylindrical") {
    if (cyl.times.empty())
        throw std::invalid_argument("make_cylindrical: no evaluation times");
    for (std::size_t i = 0; i < cyl.times.size(); ++i) {
        if (!(cyl.times[i] >= 0.0 && cyl.times[i] <= 1.0))
            throw std::invalid_argument("make_cylindrical: time outside [0,1]");
        if (i > 0 && !(cyl.times[i] > cyl.times[i - 1]))
            throw std::invalid_argument("make_cylindrical: times must be strictly increasing");
    }
    validate_gradient(cyl);

    auto shared = std::make_shared<CylindricalFunctional>(std::move(cyl));
    auto values_at_times = [shared](const PathView& x) {
        std::vector<double> v(shared->times.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = x.eval(shared->times[i]);
        return v;
    };
    return PathFunctional{
        std::move(name),
        [shared, values_at_times](const PathView& x) { return shared->f(values_at_times(x)); },
        [shared, values_at_times](const PathView& x) {
            const std::vector<double> g = shared->grad_f(values_at_times(x));
            std::vector<MeasureAtom> atoms(g.size());
            for (std::size_t i = 0; i < g.size(); ++i)
                atoms[i] = MeasureAtom{shared->times[i], g[i]};
            return DiscreteMeasure{std::move(atoms)};
        },
        lipschitz_bound,
    };
}

// M(x) = max_t x(t); derivative is a unit Dirac mass at the first argmax.
inline PathFunctional max_functional() {
    return PathFunctional{
        "max",
        [](const PathView& x) { return x.statistics().max; },
        [](const PathView& x) {
            return DiscreteMeasure{{MeasureAtom{x.statistics().argmax_t, 1.0}}};
        },
        1.0,
    };
}

// N(x) = max_t |x(t)|; derivative is sign(x(argmax)) times a Dirac mass there.
// sign(0) = +1: the zero-path event is null under every mu used, but the
// convention must be deterministic.
inline PathFunctional supnorm_functional() {
    return PathFunctional{
        "supnorm",
        [](const PathView& x) { return x.statistics().sup_norm; },
        [](const PathView& x) {
            const PathStatistics s = x.statistics();
            const double sign = (s.sup_value >= 0.0) ? 1.0 : -1.0;
            return DiscreteMeasure{{MeasureAtom{s.argmax_abs_t, sign}}};
        },
        1.0,
    };
}

// phi o F for scalar smooth phi: the derivative measure is scaled by
// phi'(F(x)), matching the chain rule of the sharp operator.
inline PathFunctional compose(std::function<double(double)> phi,
                              std::function<double(double)> phi_prime,
                              PathFunctional F, std::string name = "composed") {
    auto base = std::make_shared<PathFunctional>(std::move(F));
    auto phi_p = std::move(phi_prime);
    return PathFunctional{
        std::move(name),
        [base, phi](const PathView& x) { return phi(base->value(x)); },
        [base, phi_p](const PathView& x) {
            DiscreteMeasure d = base->derivative(x);
            const double scale = phi_p(base->value(x));
            for (auto& a : d.atoms) a.w *= scale;
            return d;
        },
        std::numeric_limits<double>::infinity(),
    };
}

// F(max(x), sup_norm(x)) for smooth f2 : R^2 -> R. The derivative combines the
// argmax atoms of both coordinates weighted by the partial derivatives of f2.
inline PathFunctional argmax_pair_functional(
    std::function<double(double, double)> f2,
    std::function<std::pair<double, double>(double, double)> grad2,
    std::string name = "argmax_pair") {
    return PathFunctional{
        std::move(name),
        [f2](const PathView& x) {
            const PathStatistics s = x.statistics();
            return f2(s.max, s.sup_norm);
        },
        [grad2](const PathView& x) {
            const PathStatistics s = x.statistics();
            const auto [g1, g2] = grad2(s.max, s.sup_norm);
            const double sign = (s.sup_value >= 0.0) ? 1.0 : -1.0;
            return make_measure({MeasureAtom{s.argmax_t, g1},
                                 MeasureAtom{s.argmax_abs_t, g2 * sign}});
        },
        std::numeric_limits<double>::infinity(),
    };
}

namespace detail {
inline DiscreteMeasure derivative_checked(const PathFunctional& F, const PathView& x) {
    DiscreteMeasure d = F.derivative(x);
    if (d.total_mass() > F.lipschitz_bound * (1.0 + 1e-12))
        throw std::runtime_error("functional '" + F.name +
                                 "': derivative mass exceeds declared Lipschitz bound");
    return d;
}
}  // namespace detail

// Gamma[F(X_n)] as the exact double sum of Gamma[X_n(s), X_n(t)] against the
// derivative atoms. Clamps the O(eps) negative roundoff of the positive
// quadratic form to zero.
inline double gamma_of_functional(const PathFunctional& F, const WalkPath& path) {
    const DiscreteMeasure d = detail::derivative_checked(F, path.view());
    CompensatedSum acc;
    for (const auto& ai : d.atoms)
        for (const auto& aj : d.atoms)
            acc.add(ai.w * aj.w * gamma_pair(path, ai.t, aj.t));
    const double v = acc.value();
    if (v < 0.0) {
        const double mass = d.total_mass();
        const double scale = std::max(1.0, mass * mass * gamma_pair(path, 1.0, 1.0));
        if (v < -1e-12 * scale)
            throw std::runtime_error("gamma_of_functional: quadratic form came out negative");
        return 0.0;
    }
    return v;
}

// Bilinear extension Gamma[F(X_n), G(X_n)]: the double sum of the pairwise
// form against both derivative measures. Symmetric in (F, G); the diagonal
// reduces to gamma_of_functional.
inline double gamma_of_pair(const PathFunctional& F, const PathFunctional& G,
                            const WalkPath& path) {
    const DiscreteMeasure df = detail::derivative_checked(F, path.view());
    const DiscreteMeasure dg = detail::derivative_checked(G, path.view());
    CompensatedSum acc;
    for (const auto& ai : df.atoms)
        for (const auto& aj : dg.atoms)
            acc.add(ai.w * aj.w * gamma_pair(path, ai.t, aj.t));
    return acc.value();
}

// (F(X_n))^# = integral of the sharp path against the derivative measure.
inline double sharp_of_functional(const PathFunctional& F, const WalkPath& path,
                                  const SharpWalkPath& sharp) {
    const DiscreteMeasure d = detail::derivative_checked(F, path.view());
    const PathView sv = sharp.view();
    CompensatedSum acc;
    for (const auto& a : d.atoms) acc.add(a.w * sv.eval(a.t));
    return acc.value();
}

// Closed-form copy-expectation of (F^#)^2: with a_k(t) the coordinate partial
// of X_n(t), this is sum_k (sum_i w_i a_k(t_i))^2 gamma(U_k). It must agree
// with gamma_of_functional exactly; the two code paths share nothing but the
// derivative atoms.
inline double sharp_copy_expectation(const PathFunctional& F, const WalkPath& path) {
    const DiscreteMeasure d = detail::derivative_checked(F, path.view());
    CompensatedSum acc;
    for (std::size_t k = 1; k <= path.n; ++k) {
        double inner = 0.0;
        for (const auto& a : d.atoms) inner += a.w * coordinate_weight(path.n, a.t, k);
        acc.add(inner * inner * path.gammas[k - 1]);
    }
    return acc.value();
}

namespace detail {
// Piecewise-linear hat of height 1 at grid node k, supported on the two
// adjacent cells.
inline double hat_eval(std::size_t k, std::size_t m, double t) {
    const double d = std::abs(t * static_cast<double>(m) - static_cast<double>(k));
    return std::max(0.0, 1.0 - d);
}
}  // namespace detail

// Probes F(x + h g) - F(x) = h <F'(x), g> + o(h) with hat bumps g at the
// derivative atoms; returns the largest |directional difference - pairing|
// over the atoms (the hats have unit sup norm). Vanishes as h -> 0 for smooth
// F, and to machine precision for linear F.
inline double finite_difference_derivative_check(const PathFunctional& F,
                                                 const PathView& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_derivative_check: h <= 0");
    const DiscreteMeasure d = F.derivative(x);
    if (d.atoms.empty()) return 0.0;
    const std::size_t m = x.segments();
    const double f0 = F.value(x);
    std::vector<double> bumped(x.nodes().begin(), x.nodes().end());
    double worst = 0.0;
    for (const auto& bump_atom : d.atoms) {
        const auto k = static_cast<std::size_t>(
            std::llround(bump_atom.t * static_cast<double>(m)));
        bumped.assign(x.nodes().begin(), x.nodes().end());
        bumped[k] += h;
        const double f1 = F.value(PathView(bumped));
        double pairing = 0.0;
        for (const auto& a : d.atoms) pairing += a.w * detail::hat_eval(k, m, a.t);
        worst = std::max(worst, std::abs((f1 - f0) / h - pairing));
    }
    return worst;
}

}  // namespace donsker
