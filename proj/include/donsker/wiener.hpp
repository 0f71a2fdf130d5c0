#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "donsker/functionals.hpp"
#include "donsker/montecarlo.hpp"
#include "donsker/path_view.hpp"
#include "donsker/rng.hpp"

namespace donsker {

// Brownian path sampled on the grid k/m: increments i.i.d. N(0, sigma^2/m).
// Carries the carre-du-champ constant c of the limit structure so the Gamma_0
// expressions below are self-contained.
struct BrownianGrid {
    std::size_t m = 0;
    std::vector<double> values;  // size m+1, values[0] = 0
    double sigma = 1.0;
    double c = 1.0;

    PathView view() const { return PathView(values); }
};

inline BrownianGrid sample_brownian(double sigma, double c, std::size_t m, Stream& stream) {
    if (m < 1) throw std::invalid_argument("sample_brownian: m must be >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("sample_brownian: sigma must be positive");
    BrownianGrid b;
    b.m = m;
    b.sigma = sigma;
    b.c = c;
    b.values.resize(m + 1);
    b.values[0] = 0.0;
    const double step_sd = sigma / std::sqrt(static_cast<double>(m));
    double sum = 0.0;
    for (std::size_t k = 1; k <= m; ++k) {
        sum += step_sd * stream.next_normal();
        b.values[k] = sum;
    }
    return b;
}

// Piecewise-constant h on [0,1]: h = values[i] on [edges[i], edges[i+1]).
struct StepFunction {
    std::vector<double> edges;   // 0 = edges[0] < ... < edges.back() = 1
    std::vector<double> values;
};

// Gamma_0 on the first chaos: Gamma_0[int h dB] = c * int h^2 dt, evaluated
// exactly on the pieces.
inline double gamma0_first_chaos(const StepFunction& h, double c) {
    if (h.edges.size() != h.values.size() + 1 || h.values.empty())
        throw std::invalid_argument("gamma0_first_chaos: malformed step function");
    if (h.edges.front() != 0.0 || h.edges.back() != 1.0)
        throw std::invalid_argument("gamma0_first_chaos: edges must span [0,1]");
    CompensatedSum acc;
    for (std::size_t i = 0; i < h.values.size(); ++i) {
        const double len = h.edges[i + 1] - h.edges[i];
        if (!(len > 0.0)) throw std::invalid_argument("gamma0_first_chaos: edges must increase");
        acc.add(h.values[i] * h.values[i] * len);
    }
    return c * acc.value();
}

// The integrand whose expectation is the cylindrical limit form:
// sum_ij f'_i f'_j c (t_i ^ t_j) with the gradient evaluated at the sampled B.
inline double gamma0_cylindrical(const CylindricalFunctional& F, const BrownianGrid& b) {
    const PathView x = b.view();
    std::vector<double> vals(F.times.size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = x.eval(F.times[i]);
    const std::vector<double> g = F.grad_f(vals);
    CompensatedSum acc;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j)
            acc.add(g[i] * g[j] * std::min(F.times[i], F.times[j]));
    return b.c * acc.value();
}

struct ArgmaxTimes {
    double sigma_time = 0.0;  // first time the max is attained
    double tau_time = 0.0;    // first time the absolute max is attained
};

inline ArgmaxTimes argmax_times(const BrownianGrid& b) {
    const PathStatistics s = b.view().statistics();
    return ArgmaxTimes{s.argmax_t, s.argmax_abs_t};
}

// Gamma_0[F(B)] for atomic F'(B): c * sum_ij w_i w_j (s_i ^ s_j), the exact
// value of the double integral of s ^ t against the derivative measure.
// For the max functional this is c times the argmax time; for the sup norm,
// c times the absolute-argmax time.
inline double gamma0_lemma2(const PathFunctional& F, const BrownianGrid& b) {
    const DiscreteMeasure d = detail::derivative_checked(F, b.view());
    CompensatedSum acc;
    for (const auto& ai : d.atoms)
        for (const auto& aj : d.atoms)
            acc.add(ai.w * aj.w * std::min(ai.t, aj.t));
    return b.c * acc.value();
}

// B^# = (sqrt(c)/sigma) * Bhat, so the copy-expectation of (B_t^#)^2 equals
// c * t = Gamma_0[B_t].
inline double sharp_brownian_scale(double sigma, double c) {
    if (!(sigma > 0.0) || !(c > 0.0))
        throw std::invalid_argument("sharp_brownian_scale: sigma and c must be positive");
    return std::sqrt(c) / sigma;
}

// Monte Carlo value of the three-term limit expression for functionals of
// (max, sup norm): F_1'^2 tau + 2 F_1' F_2' (tau ^ sigma) + F_2'^2 sigma,
// scaled by c, with the gradient evaluated at (M, N) of the sampled path.
inline EstimateReport prop2_limit(
    const std::function<std::pair<double, double>(double, double)>& grad2,
    std::uint64_t samples, SeedSpec seed, std::size_t m, double sigma, double c,
    unsigned workers = 1) {
    auto sampler = [&grad2, m, sigma, c](Stream& stream) {
        const BrownianGrid b = sample_brownian(sigma, c, m, stream);
        const PathStatistics s = b.view().statistics();
        const auto [g1, g2] = grad2(s.max, s.sup_norm);
        const double sigma_time = s.argmax_t;
        const double tau_time = s.argmax_abs_t;
        return c * (g1 * g1 * tau_time + 2.0 * g1 * g2 * std::min(tau_time, sigma_time) +
                    g2 * g2 * sigma_time);
    };
    return estimate(sampler, samples, seed, workers);
}

}  // namespace donsker
