#pragma once

// End-to-end evaluation: optional CCA subspace projection fitted on anchors,
// then either affine translation + cosine similarity or local CKA scoring of
// every query pair, followed by assignment matching and top-k retrieval.
// Query similarity matrices always have identity ground truth.

#include "latent_align/affine.hpp"
#include "latent_align/cca.hpp"
#include "latent_align/dataset.hpp"
#include "latent_align/kernels.hpp"
#include "latent_align/report.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace latent_align {

enum class Method { Affine, LocalCka };
enum class Direction { TextTo3d, ThreeDToText };
enum class AffineSolver { Lsq, GradientDescent };

Method parse_method(std::string_view name);
std::string_view method_name(Method m) noexcept;
Direction parse_direction(std::string_view name);
std::string_view direction_name(Direction d) noexcept;
AffineSolver parse_solver(std::string_view name);
std::string_view solver_name(AffineSolver s) noexcept;

struct EvalConfig {
    Method method = Method::Affine;
    Direction direction = Direction::TextTo3d;
    KernelSpec kernel = KernelSpec::linear();
    double ridge = 1e-6;
    bool cca_standardize = false;
    bool affine_standardize = true;
    bool with_bias = true;
    AffineSolver solver = AffineSolver::Lsq;
    GradientDescentOptions gd;
    Index n_anchor = 30000;          ///< anchors for CCA and the affine fit
    Index local_cka_anchors = 1000;  ///< leading anchors used by local CKA
    Index n_query = 500;
    std::vector<Index> ks{1, 5, 10};
    std::vector<std::uint64_t> seeds{0, 1, 2};
};

/// Which paired side is the retrieval source (rows of the similarity matrix).
/// Modalities labelled "text"/"3d" decide; unlabelled data treats x as 3D and
/// y as text.
struct Roles {
    Side source;
    Side target;
};
Roles resolve_roles(const PairedDataset& ds, Direction direction);

/// Query-by-query similarity for the configured method (rows: source queries,
/// columns: target queries). With k set, both sides are first projected by a
/// CCA fitted on all split anchors.
Matrix build_similarity(const PairedDataset& ds, const Split& split, std::optional<Index> k,
                        const EvalConfig& cfg);

/// Score a similarity matrix: matching accuracy plus top-k for cfg.ks.
RetrievalReport score_similarity(const Matrix& similarity, std::span<const Index> ks);

RetrievalReport evaluate_affine_pipeline(const PairedDataset& ds, const Split& split,
                                         std::optional<Index> k, const EvalConfig& cfg);
RetrievalReport evaluate_local_cka_pipeline(const PairedDataset& ds, const Split& split,
                                            std::optional<Index> k, const EvalConfig& cfg);
/// Dispatch on cfg.method.
RetrievalReport evaluate_pipeline(const PairedDataset& ds, const Split& split,
                                  std::optional<Index> k, const EvalConfig& cfg);

/// One report per seed in cfg.seeds (split drawn with cfg.n_anchor / n_query).
std::vector<RetrievalReport> evaluate_seeds(const PairedDataset& ds, std::optional<Index> k,
                                            const EvalConfig& cfg);

/// Mean over reports of matching accuracy and each top-k (seed fields zeroed).
struct MetricSummary {
    std::string metric;
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
};
std::vector<MetricSummary> summarize(std::span<const RetrievalReport> reports);

/// Pairwise CKA between sets (all sets must have equal sample counts).
Matrix cka_heatmap(std::span<const EmbeddingSet> sets, const KernelSpec& spec);

/// Fit an affine map for every ordered pair (i -> j) on fit_rows and score
/// entry (i, j) = CKA(T_ij(S_i[eval_rows]), S_j[eval_rows]). Both directions
/// of each pair are reported; the diagonal is CKA of a set with itself.
struct HeatmapAlignment {
    std::vector<Index> fit_rows;
    std::vector<Index> eval_rows;
    AffineOptions affine;
};
Matrix cka_heatmap(std::span<const EmbeddingSet> sets, const KernelSpec& spec,
                   const HeatmapAlignment& alignment);

/// Subspace-dimension sweep. Per seed, one CCA at max(dims) is fitted and
/// truncated. Emits, for each metric, the projected curve ("<metric>") and the
/// no-projection reference ("baseline_<metric>", constant across dims).
std::vector<AblationCurve> ablate_dimension(const PairedDataset& ds, std::span<const Index> dims,
                                            const EvalConfig& cfg);

/// Anchor-count sweep for each subspace dimension. The query set is fixed per
/// seed and smaller anchor sets are prefixes of larger ones. Curves are named
/// "<metric>@dim=<k>". Throws InvalidSplit when max(counts) + n_query > n.
std::vector<AblationCurve> ablate_anchors(const PairedDataset& ds,
                                          std::span<const Index> anchor_counts,
                                          std::span<const Index> dims, const EvalConfig& cfg);

/// Metric names produced for a report, in a fixed order:
/// matching_accuracy, top_<k>...
std::vector<std::string> metric_names(std::span<const Index> ks);
double metric_value(const RetrievalReport& report, std::string_view metric);

} // namespace latent_align
