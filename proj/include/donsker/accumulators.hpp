#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace donsker {

// Neumaier compensated sum. Long reductions of quadratic quantities
// (1e6+ samples) keep full double precision this way.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }

    // Fold another partial sum. Folding fixed-size blocks in index order makes
    // the result independent of how blocks were assigned to workers.
    void merge(const CompensatedSum& other) noexcept {
        add(other.sum_);
        add(other.comp_);
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Streaming mean / variance over compensated sum and sum of squares.
class MomentAccumulator {
public:
    void add(double x) noexcept {
        ++n_;
        sum_.add(x);
        sumsq_.add(x * x);
    }

    void merge(const MomentAccumulator& o) noexcept {
        n_ += o.n_;
        sum_.merge(o.sum_);
        sumsq_.merge(o.sumsq_);
    }

    std::uint64_t count() const noexcept { return n_; }

    double mean() const noexcept {
        return n_ == 0 ? 0.0 : sum_.value() / static_cast<double>(n_);
    }

    // Unbiased sample variance.
    double variance() const noexcept {
        if (n_ < 2) return 0.0;
        const double m = mean();
        const double raw = sumsq_.value() / static_cast<double>(n_) - m * m;
        return std::max(0.0, raw) * static_cast<double>(n_) / static_cast<double>(n_ - 1);
    }

    double std_error() const noexcept {
        return n_ == 0 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
    }

private:
    std::uint64_t n_ = 0;
    CompensatedSum sum_;
    CompensatedSum sumsq_;
};

}  // namespace donsker
