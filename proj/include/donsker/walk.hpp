#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "donsker/error_structure.hpp"
#include "donsker/path_view.hpp"

namespace donsker {

// Donsker interpolation of the normalized walk: node k/n carries
// (1/sqrt(n)) * (U_1 + ... + U_k). Increments and per-coordinate gammas are
// stored so exact coordinate partials stay available downstream; gamma_prefix
// makes the pairwise carre du champ an O(1) lookup.
struct WalkPath {
    std::size_t n = 0;
    std::vector<double> increments;           // U_1..U_n
    std::vector<double> partial_sums_scaled;  // size n+1, node values
    std::vector<double> gammas;               // gamma(U_k)
    std::vector<double> gamma_prefix;         // size n+1, prefix sums of gammas

    PathView view() const { return PathView(partial_sums_scaled); }
};

// Same grid built from the sharp coordinates U_k^# in place of U_k.
struct SharpWalkPath {
    std::size_t n = 0;
    std::vector<double> increments;
    std::vector<double> partial_sums_scaled;

    PathView view() const { return PathView(partial_sums_scaled); }
};

inline std::pair<WalkPath, SharpWalkPath> build_path(std::span<const CoordinateDraw> draws,
                                                     const ErrorStructure1D& es) {
    if (draws.empty()) throw std::invalid_argument("build_path: empty draw sequence");
    const std::size_t n = draws.size();
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));

    WalkPath path;
    SharpWalkPath sharp;
    path.n = sharp.n = n;
    path.increments.resize(n);
    path.gammas.resize(n);
    path.partial_sums_scaled.resize(n + 1);
    path.gamma_prefix.resize(n + 1);
    sharp.increments.resize(n);
    sharp.partial_sums_scaled.resize(n + 1);

    double sum = 0.0, sharp_sum = 0.0, gsum = 0.0;
    path.partial_sums_scaled[0] = 0.0;
    path.gamma_prefix[0] = 0.0;
    sharp.partial_sums_scaled[0] = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double g = gamma_coordinate(es, draws[k].u);
        path.increments[k] = draws[k].u;
        path.gammas[k] = g;
        sum += draws[k].u;
        gsum += g;
        path.partial_sums_scaled[k + 1] = sum * scale;
        path.gamma_prefix[k + 1] = gsum;

        sharp.increments[k] = std::sqrt(g) * draws[k].g_hat;
        sharp_sum += sharp.increments[k];
        sharp.partial_sums_scaled[k + 1] = sharp_sum * scale;
    }
    return {std::move(path), std::move(sharp)};
}

inline double eval(const WalkPath& path, double t) { return path.view().eval(t); }
inline double eval(const SharpWalkPath& path, double t) { return path.view().eval(t); }

// Exact coordinate partial d X_n(t) / d U_k for 1-based k:
// 1/sqrt(n) for k <= [nt], (nt - [nt])/sqrt(n) for k = [nt]+1, else 0.
inline double coordinate_weight(std::size_t n, double t, std::size_t k) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("coordinate_weight: t outside [0,1]");
    const double q = t * static_cast<double>(n);
    auto floor_q = static_cast<std::size_t>(q);
    if (floor_q > n) floor_q = n;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    if (k >= 1 && k <= floor_q) return scale;
    if (k == floor_q + 1) return (q - static_cast<double>(floor_q)) * scale;
    return 0.0;
}

// Pairwise carre du champ of the interpolated walk,
//   Gamma[X_n(s), X_n(t)] = (1/n) [ sum_{k <= [ns]^[nt]} gamma(U_k) + alpha(n,s,t) ]
// with the boundary term alpha covering the partially-included coordinate.
// Symmetric in (s,t); at t = 1 the fractional part is 0 and no coordinate
// beyond U_n is referenced.
inline double gamma_pair(const WalkPath& path, double s, double t) {
    if (!(s >= 0.0 && s <= 1.0 && t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("gamma_pair: arguments outside [0,1]");
    const auto n = static_cast<double>(path.n);
    const double qs = s * n;
    const double qt = t * n;
    auto ks = static_cast<std::size_t>(qs);
    auto kt = static_cast<std::size_t>(qt);
    if (ks > path.n) ks = path.n;
    if (kt > path.n) kt = path.n;

    const std::size_t k_min = std::min(ks, kt);
    double alpha = 0.0;
    if (ks < kt) {
        alpha = (qs - static_cast<double>(ks)) * path.gammas[ks];
    } else if (ks > kt) {
        alpha = (qt - static_cast<double>(kt)) * path.gammas[kt];
    } else if (k_min < path.n) {
        alpha = (qs - static_cast<double>(ks)) * (qt - static_cast<double>(kt)) * path.gammas[k_min];
    }
    return (path.gamma_prefix[k_min] + alpha) / n;
}

inline PathStatistics path_statistics(const WalkPath& path) { return path.view().statistics(); }

}  // namespace donsker
