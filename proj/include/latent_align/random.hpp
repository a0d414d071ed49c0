#pragma once

// Portable seeded randomness. The standard library's distributions are
// implementation-defined, so sampling is done here on top of SplitMix64
// (64-bit state, increment 0x9E3779B97F4A7C15, finalizer constants
// 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB) to make splits and synthetic data
// reproduce bit-for-bit on every platform.

#include <cstdint>
#include <limits>
#include <vector>

namespace latent_align {

class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound) by rejection; bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept;

    /// Standard normal via Box-Muller (one draw per call, no caching).
    double normal() noexcept;

    /// Child generator for an independent stream (used per sweep point).
    SplitMix64 fork(std::uint64_t stream) noexcept;

private:
    std::uint64_t state_;
};

/// First `count` entries of a seeded Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                    SplitMix64& rng);

} // namespace latent_align
