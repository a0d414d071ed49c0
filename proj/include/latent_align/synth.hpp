#pragma once

// Synthetic paired embeddings with a known shared subspace:
//
//   X = Z A + noise_sigma * E_x,   Y = Z B + noise_sigma * E_y
//
// Z (n x k_shared) holds standard normal shared factors; A and B are Gaussian
// mixing matrices scaled so every signal column has unit variance. E_x and E_y
// are independent zero-mean Gaussian noise with a random-basis covariance whose
// eigenvalues decay as 1/(i+1), normalised to unit mean variance per column.
// The decaying spectrum gives the noise the low-rank structure real embedding
// spaces have, so it dominates distances in the full space.

#include "latent_align/dataset.hpp"

#include <cstdint>
#include <vector>

namespace latent_align {

struct SynthOptions {
    Index n = 0;
    Index p = 0;
    Index q = 0;
    Index k_shared = 0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;
};

struct SynthData {
    PairedDataset data; ///< x is labelled "3d", y "text"; ids are "s000000", ...
    Matrix latents;     ///< Z, n x k_shared
};

/// Throws InvalidShape unless k_shared <= min(p, q), n >= 1 and noise_sigma >= 0.
SynthData synth_generate_with_latents(const SynthOptions& options);

PairedDataset synth_generate(Index n, Index p, Index q, Index k_shared, double noise_sigma,
                             std::uint64_t seed);

/// Point clouds whose geometry is driven by the first min(3, k) latent factors:
/// a fixed Fibonacci sphere of `points` directions stretched along each axis by
/// exp(0.3 * z_a). One m x 3 cloud per listed latent row.
std::vector<Matrix> synth_shapes(const Matrix& latents, std::span<const Index> rows,
                                 Index points = 64);

} // namespace latent_align
