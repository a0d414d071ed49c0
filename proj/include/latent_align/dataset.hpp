#pragma once

#include "latent_align/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace latent_align {

struct EmbeddingSet {
    std::vector<std::string> ids;
    Matrix features;
    std::string modality;

    Index size() const noexcept { return ids.size(); }
    Index dim() const noexcept { return static_cast<Index>(features.cols()); }
};

/// Throws DataError unless ids are unique, match the row count, and features are finite.
void validate(const EmbeddingSet& set);

/// Two embedding sets whose rows correspond one-to-one (x.ids == y.ids).
struct PairedDataset {
    EmbeddingSet x;
    EmbeddingSet y;

    Index size() const noexcept { return x.size(); }
};

struct PairingResult {
    PairedDataset data;
    Index dropped_x = 0; ///< x samples with no partner in y
    Index dropped_y = 0; ///< y samples with no partner in x
};

/// Pair by identifier, keeping x's order. Throws PairingError when no id is shared.
PairingResult pair_by_id(const EmbeddingSet& x, const EmbeddingSet& y);

std::vector<std::string> load_ids(const std::filesystem::path& path);
void save_ids(const std::filesystem::path& path, const std::vector<std::string>& ids);

/// Manifest: {"x": {"features", "ids", "modality"}, "y": {...}}; relative paths
/// resolve against the manifest's directory.
PairingResult load_paired(const std::filesystem::path& manifest_path);

/// Write features/ids files for both sides plus manifest.json into `dir`.
/// Returns the manifest path.
std::filesystem::path save_paired(const std::filesystem::path& dir, const PairedDataset& ds);

/// Disjoint anchor and query index sets drawn from [0, n).
struct Split {
    std::vector<Index> anchor_indices;
    std::vector<Index> query_indices;
    std::uint64_t seed = 0;
};

/// Seeded uniform sample without replacement. Queries are taken first from one
/// shuffle and anchors follow, so for fixed (n, n_query, seed) the query set does
/// not depend on n_anchor and smaller anchor sets are prefixes of larger ones.
/// Throws InvalidSplit when n_anchor + n_query > n.
Split make_split(Index n, Index n_anchor, Index n_query, std::uint64_t seed);

/// Deterministic text form used for reproducibility checks.
std::string serialize_split(const Split& split);

} // namespace latent_align
