#include "latent_align/random.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace latent_align {

std::uint64_t SplitMix64::below(std::uint64_t bound) noexcept {
    // Reject the partial top bucket so every residue is equally likely.
    const std::uint64_t limit = max() - (max() % bound + 1) % bound;
    std::uint64_t draw = (*this)();
    while (draw > limit) {
        draw = (*this)();
    }
    return draw % bound;
}

double SplitMix64::normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SplitMix64 SplitMix64::fork(std::uint64_t stream) noexcept {
    SplitMix64 mixer(state_ ^ (stream * 0xD1B54A32D192ED03ULL));
    return SplitMix64(mixer());
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                    SplitMix64& rng) {
    if (count > n) {
        throw std::invalid_argument("sample larger than population");
    }
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

} // namespace latent_align
