#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace donsker {

// Gauss-Legendre nodes and weights on [-1,1], by Newton iteration on the
// Legendre recurrence. One-dimensional Gaussian tail quantities are computed
// with this rather than Monte Carlo so they can serve as oracles.
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendreRule(std::size_t order) {
        if (order < 2) throw std::invalid_argument("GaussLegendreRule: order < 2");
        nodes.resize(order);
        weights.resize(order);
        const std::size_t half = (order + 1) / 2;
        for (std::size_t i = 0; i < half; ++i) {
            double z = std::cos(3.14159265358979323846 *
                                (static_cast<double>(i) + 0.75) /
                                (static_cast<double>(order) + 0.5));
            double pp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = 0.0;
                for (std::size_t j = 0; j < order; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * static_cast<double>(j) + 1.0) * z * p1 -
                          static_cast<double>(j) * p2) /
                         (static_cast<double>(j) + 1.0);
                }
                pp = static_cast<double>(order) * (z * p0 - p1) / (z * z - 1.0);
                const double dz = p0 / pp;
                z -= dz;
                if (std::abs(dz) < 1e-15) break;
            }
            nodes[i] = -z;
            nodes[order - 1 - i] = z;
            weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[order - 1 - i] = weights[i];
        }
    }
};

// Composite Gauss-Legendre integral of f over [a,b].
template <typename F>
double integrate(F&& f, double a, double b, std::size_t panels = 32, std::size_t order = 16) {
    if (!(b >= a)) throw std::invalid_argument("integrate: b < a");
    if (a == b) return 0.0;
    static thread_local std::vector<std::pair<std::size_t, GaussLegendreRule>> cache;
    const GaussLegendreRule* rule = nullptr;
    for (const auto& entry : cache)
        if (entry.first == order) rule = &entry.second;
    if (rule == nullptr) {
        cache.emplace_back(order, GaussLegendreRule(order));
        rule = &cache.back().second;
    }
    const double h = (b - a) / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + h * static_cast<double>(p);
        const double mid = lo + 0.5 * h;
        double acc = 0.0;
        for (std::size_t i = 0; i < order; ++i)
            acc += rule->weights[i] * f(mid + 0.5 * h * rule->nodes[i]);
        total += 0.5 * h * acc;
    }
    return total;
}

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / 2.506628274631000502415765284811;  // sqrt(2*pi)
}

}  // namespace donsker
