#pragma once

#include <cmath>
#include <cstdint>

namespace donsker {

// SplitMix64 finalizer. Used both as the stream generator step and to derive
// decorrelated stream states from (seed, stream, index) keys.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Deterministic random stream (SplitMix64 sequence). Every Monte Carlo sample
// gets its own Stream keyed by its sample index, so results are bit-identical
// no matter how samples are partitioned across workers.
class Stream {
public:
    explicit Stream(std::uint64_t state) noexcept : state_(state) {}

    std::uint64_t next_u64() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on [0,1), 53-bit resolution.
    double next_u01() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double a, double b) noexcept {
        return a + (b - a) * next_u01();
    }

    // Standard normal via Box-Muller. Consumes exactly two words per call.
    double next_normal() noexcept {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
        const double u2 = next_u01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    std::uint64_t state_;
};

// Independent stream for key (master_seed, stream_id, index). stream_id
// separates the logical estimands of one run; index is the sample counter.
inline Stream derive_stream(std::uint64_t master_seed,
                            std::uint64_t stream_id,
                            std::uint64_t index) noexcept {
    std::uint64_t s = splitmix64_mix(master_seed ^ 0x6A09E667F3BCC909ull);
    s = splitmix64_mix(s ^ (0x9E3779B97F4A7C15ull * (stream_id + 1)));
    s = splitmix64_mix(s ^ (0xC2B2AE3D27D4EB4Full * (index + 1)));
    return Stream(s);
}

}  // namespace donsker
