#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "donsker/rng.hpp"

namespace donsker {

// A draw U_k from mu together with the independent standard-normal copy draw
// used to realize the sharp operator on that coordinate.
struct CoordinateDraw {
    double u = 0.0;
    double g_hat = 0.0;
};

// One-dimensional error structure: sampler for mu, the coordinate
// carre-du-champ function gamma, sigma2 = mu(j^2) and c = int gamma dmu.
// Closability of the associated form is a user obligation; it is not
// checkable numerically.
struct ErrorStructure1D {
    std::string name;
    std::function<double(Stream&)> sample;
    std::function<double(double)> gamma;
    double sigma2 = 1.0;
    double c = 1.0;
};

// mu = N(0,1), gamma == 1: the Ornstein-Uhlenbeck structure on R.
inline ErrorStructure1D ou_gauss() {
    return ErrorStructure1D{
        "ou_gauss",
        [](Stream& stream) { return stream.next_normal(); },
        [](double) { return 1.0; },
        1.0,
        1.0,
    };
}

// mu uniform on [-sqrt(3), sqrt(3)] (variance 1), gamma(x) = kappa*(3 - x^2).
// gamma vanishes on the boundary of the support; c = 2*kappa, so the default
// kappa = 1/2 gives sigma2 = c = 1 and the same limits as ou_gauss.
inline ErrorStructure1D weighted_uniform(double kappa = 0.5) {
    if (!(kappa > 0.0)) throw std::invalid_argument("weighted_uniform: kappa must be positive");
    const double half_width = std::sqrt(3.0);
    return ErrorStructure1D{
        "weighted_uniform",
        [half_width](Stream& stream) { return stream.next_uniform(-half_width, half_width); },
        [kappa](double x) { return kappa * (3.0 - x * x); },
        1.0,
        2.0 * kappa,
    };
}

// gamma(u) with validation; a user-supplied gamma going negative on the
// support of mu is a fatal configuration error.
inline double gamma_coordinate(const ErrorStructure1D& es, double u) {
    const double g = es.gamma(u);
    if (!(g >= 0.0))
        throw std::runtime_error("error structure '" + es.name +
                                 "': gamma(" + std::to_string(u) + ") is negative");
    return g;
}

// n i.i.d. coordinate draws from the product structure. Errors on distinct
// coordinates are uncorrelated by construction; independence of the copy
// coordinate g_hat from u comes from drawing them in sequence from one stream.
inline std::vector<CoordinateDraw> sample_increments(const ErrorStructure1D& es,
                                                     std::size_t n, Stream& stream) {
    if (n < 1) throw std::invalid_argument("sample_increments: n must be >= 1");
    if (!es.sample || !es.gamma)
        throw std::runtime_error("error structure '" + es.name + "': sampler or gamma not configured");
    std::vector<CoordinateDraw> draws(n);
    for (auto& d : draws) {
        d.u = es.sample(stream);
        d.g_hat = stream.next_normal();
    }
    return draws;
}

// U^# = sqrt(gamma(u)) * g_hat. The copy-expectation of (U^#)^2 is gamma(u)
// pointwise, which is all sharp operators must satisfy; the normal copy makes
// copy-expectations of quadratic forms closed-form.
inline double sharp_coordinate(const ErrorStructure1D& es, const CoordinateDraw& d) {
    return std::sqrt(gamma_coordinate(es, d.u)) * d.g_hat;
}

}  // namespace donsker
