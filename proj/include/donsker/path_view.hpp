#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace donsker {

struct PathStatistics {
    double max = 0.0;           // max over grid nodes
    double sup_norm = 0.0;      // max of |values| over grid nodes
    double argmax_t = 0.0;      // (smallest maximizing index) / m
    double argmax_abs_t = 0.0;  // same for |values|
    double sup_value = 0.0;     // signed node value at argmax_abs_t
    double endpoint = 0.0;
};

// A path given by its values on the uniform grid k/m of [0,1], linearly
// interpolated in between. The normalized walk, its sharp path and sampled
// Brownian grids are all consumed through this view.
class PathView {
public:
    explicit PathView(std::span<const double> nodes) : nodes_(nodes) {
        if (nodes_.size() < 2)
            throw std::invalid_argument("PathView: need at least two grid nodes");
    }

    std::size_t segments() const noexcept { return nodes_.size() - 1; }
    std::span<const double> nodes() const noexcept { return nodes_; }

    double eval(double t) const {
        if (!(t >= 0.0 && t <= 1.0))
            throw std::invalid_argument("PathView::eval: t outside [0,1]");
        const double q = t * static_cast<double>(segments());
        const auto k = static_cast<std::size_t>(q);
        if (k >= segments()) return nodes_.back();
        const double frac = q - static_cast<double>(k);
        return nodes_[k] + frac * (nodes_[k + 1] - nodes_[k]);
    }

    // Extrema of the interpolation are attained at grid nodes. Ties are broken
    // toward the smallest index, which is deterministic and measure-irrelevant
    // for the laws used here.
    PathStatistics statistics() const {
        PathStatistics s;
        s.max = nodes_[0];
        s.sup_norm = std::abs(nodes_[0]);
        std::size_t k_max = 0, k_abs = 0;
        for (std::size_t k = 1; k < nodes_.size(); ++k) {
            if (nodes_[k] > s.max) {
                s.max = nodes_[k];
                k_max = k;
            }
            if (std::abs(nodes_[k]) > s.sup_norm) {
                s.sup_norm = std::abs(nodes_[k]);
                k_abs = k;
            }
        }
        const double m = static_cast<double>(segments());
        s.argmax_t = static_cast<double>(k_max) / m;
        s.argmax_abs_t = static_cast<double>(k_abs) / m;
        s.sup_value = nodes_[k_abs];
        s.endpoint = nodes_.back();
        return s;
    }

private:
    std::span<const double> nodes_;
};

}  // namespace donsker
