#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "donsker/accumulators.hpp"
#include "donsker/error_structure.hpp"
#include "donsker/quadrature.hpp"
#include "donsker/rng.hpp"

namespace donsker {

struct EstimateReport {
    double mean = 0.0;
    double std_error = 0.0;
    double ci_lo = 0.0;  // mean - 1.96 * std_error
    double ci_hi = 0.0;
    std::uint64_t count = 0;
    std::uint64_t seed = 0;
};

// One logical random stream of an experiment. Distinct stream_ids give
// statistically independent streams; the per-sample stream is derived from
// (master_seed, stream_id, sample index).
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;
};

namespace detail {

// Samples are processed in fixed blocks and the per-block partials are folded
// in block order, so the reduction is identical for any worker count.
constexpr std::uint64_t kBlockSize = 1024;

template <typename BlockFn>
void run_blocks(std::uint64_t count, unsigned workers, BlockFn&& block_fn) {
    const std::uint64_t n_blocks = (count + kBlockSize - 1) / kBlockSize;
    if (workers == 0) workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    if (workers > n_blocks) workers = static_cast<unsigned>(n_blocks);

    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::atomic<std::uint64_t> next_block{0};

    auto worker = [&]() {
        for (;;) {
            const std::uint64_t b = next_block.fetch_add(1);
            if (b >= n_blocks) return;
            const std::uint64_t begin = b * kBlockSize;
            const std::uint64_t end = std::min(count, begin + kBlockSize);
            try {
                block_fn(b, begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

// Mean / standard error of `dim` jointly sampled quantities over `count`
// independent evaluations. The sampler must take all randomness from the
// passed stream; the report is then bit-identical for any worker count.
// A non-finite sample is a fatal data error.
inline std::vector<EstimateReport> estimate_many(
    const std::function<void(Stream&, std::span<double>)>& sampler, std::size_t dim,
    std::uint64_t count, SeedSpec seed, unsigned workers = 1) {
    if (count < 2) throw std::invalid_argument("estimate_many: count must be >= 2");
    if (dim < 1) throw std::invalid_argument("estimate_many: dim must be >= 1");

    const std::uint64_t n_blocks = (count + detail::kBlockSize - 1) / detail::kBlockSize;
    std::vector<std::vector<MomentAccumulator>> partials(
        n_blocks, std::vector<MomentAccumulator>(dim));

    detail::run_blocks(count, workers, [&](std::uint64_t b, std::uint64_t begin, std::uint64_t end) {
        std::vector<double> out(dim);
        auto& acc = partials[b];
        for (std::uint64_t i = begin; i < end; ++i) {
            Stream stream = derive_stream(seed.master_seed, seed.stream_id, i);
            sampler(stream, out);
            for (std::size_t d = 0; d < dim; ++d) {
                if (!std::isfinite(out[d]))
                    throw std::runtime_error("estimate_many: non-finite sample at index " +
                                             std::to_string(i) + " (stream " +
                                             std::to_string(seed.stream_id) + ", component " +
                                             std::to_string(d) + ")");
                acc[d].add(out[d]);
            }
        }
    });

    std::vector<MomentAccumulator> total(dim);
    for (std::uint64_t b = 0; b < n_blocks; ++b)
        for (std::size_t d = 0; d < dim; ++d) total[d].merge(partials[b][d]);

    std::vector<EstimateReport> reports(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        EstimateReport r;
        r.mean = total[d].mean();
        r.std_error = total[d].std_error();
        r.ci_lo = r.mean - 1.96 * r.std_error;
        r.ci_hi = r.mean + 1.96 * r.std_error;
        r.count = count;
        r.seed = seed.master_seed;
        reports[d] = r;
    }
    return reports;
}

inline EstimateReport estimate(const std::function<double(Stream&)>& sampler,
                               std::uint64_t count, SeedSpec seed, unsigned workers = 1) {
    auto wrapped = [&sampler](Stream& stream, std::span<double> out) { out[0] = sampler(stream); };
    return estimate_many(wrapped, 1, count, seed, workers)[0];
}

// The raw sample vector, written by sample index (deterministic under any
// worker count). Used where diagnostics need the empirical distribution.
inline std::vector<double> sample_column(const std::function<double(Stream&)>& sampler,
                                         std::uint64_t count, SeedSpec seed,
                                         unsigned workers = 1) {
    std::vector<double> values(count);
    detail::run_blocks(count, workers, [&](std::uint64_t, std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t i = begin; i < end; ++i) {
            Stream stream = derive_stream(seed.master_seed, seed.stream_id, i);
            values[i] = sampler(stream);
        }
    });
    return values;
}

struct TailDiagnostic {
    double tail_mean = 0.0;       // empirical mean of z^2 1{z^2 >= alpha}
    double tail_std_error = 0.0;
    double eq4_bound = 0.0;       // 2 alpha P(|N| >= sqrt(alpha)/(2 sigma)) + 2 E (4 sigma^2 N^2 - alpha)^+
};

// Uniform-integrability diagnostic for the squared sup norm of the walk.
// The bound is valid for alpha >= 8 sigma^2 (maximal inequality); the
// Gaussian tail quantities are evaluated by quadrature, not Monte Carlo.
inline TailDiagnostic ui_diagnostic(std::span<const double> zsq_samples, double alpha,
                                    double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("ui_diagnostic: sigma must be positive");
    if (!(alpha >= 8.0 * sigma * sigma))
        throw std::invalid_argument("ui_diagnostic: bound requires alpha >= 8 sigma^2");

    TailDiagnostic out;
    MomentAccumulator acc;
    for (const double z2 : zsq_samples) acc.add(z2 >= alpha ? z2 : 0.0);
    out.tail_mean = acc.mean();
    out.tail_std_error = acc.std_error();

    const double lambda = std::sqrt(alpha) / (2.0 * sigma);
    const double upper = 12.0;
    if (lambda < upper) {
        const auto panels = static_cast<std::size_t>((upper - lambda) / 0.25) + 1;
        const double tail_prob =
            2.0 * integrate([](double x) { return normal_pdf(x); }, lambda, upper, panels);
        const double plus_part =
            2.0 * integrate(
                      [&](double x) { return (4.0 * sigma * sigma * x * x - alpha) * normal_pdf(x); },
                      lambda, upper, panels);
        out.eq4_bound = 2.0 * alpha * tail_prob + 2.0 * plus_part;
    }
    return out;
}

// E[(1/n) max_{k<=n} gamma(U_k)] for each n. For i.i.d. L^1 gammas this tends
// to 0; for bounded gamma it is <= sup(gamma)/n deterministically.
inline std::vector<EstimateReport> lemma3_diagnostic(const ErrorStructure1D& es,
                                                     std::span<const std::size_t> n_values,
                                                     std::uint64_t samples, SeedSpec seed,
                                                     unsigned workers = 1) {
    for (std::size_t i = 1; i < n_values.size(); ++i)
        if (!(n_values[i] > n_values[i - 1]))
            throw std::invalid_argument("lemma3_diagnostic: n_values must be increasing");

    std::vector<EstimateReport> reports;
    reports.reserve(n_values.size());
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        const std::size_t n = n_values[i];
        auto sampler = [&es, n](Stream& stream) {
            double worst = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                worst = std::max(worst, gamma_coordinate(es, es.sample(stream)));
            return worst / static_cast<double>(n);
        };
        reports.push_back(
            estimate(sampler, samples, SeedSpec{seed.master_seed, seed.stream_id + i}, workers));
    }
    return reports;
}

}  // namespace donsker
