#pragma once

#include "latent_align/matrix.hpp"

#include <map>
#include <span>
#include <vector>

namespace latent_align {

struct AssignmentResult {
    std::vector<Index> permutation; ///< column assigned to each row
    double total_cost = 0.0;        ///< sum of cost(i, permutation[i]) in row order
};

/// Minimum-cost perfect assignment on a square matrix (shortest augmenting
/// paths with row/column potentials, O(n^3)).
AssignmentResult hungarian(const Matrix& cost);

struct MatchingResult {
    double accuracy = 0.0;
    AssignmentResult assignment;
};

/// Maximum-similarity assignment; the true partner of row i is column i.
MatchingResult matching_accuracy(const Matrix& similarity);

/// Hit rate at each k: row i hits when column i is among its k largest
/// entries. Ties rank the lower column index first. Throws InvalidK when k is 0
/// or exceeds the number of columns.
std::map<Index, double> topk_retrieval(const Matrix& similarity, std::span<const Index> ks);

/// Sample Pearson correlation. Throws DegenerateCorrelation for constant input.
double pearson(std::span<const double> a, std::span<const double> b);

/// Symmetric Chamfer distance with squared nearest-neighbour distances:
/// mean_p min_q |p - q|^2 + mean_q min_p |q - p|^2. Points are rows (m x 3).
double chamfer_distance(const Matrix& p, const Matrix& q);

enum class FeatureDistance { Euclidean, Cosine };

/// Pearson correlation between Chamfer distances of every unordered shape pair
/// and the distances between the corresponding feature rows.
double chamfer_latent_correlation(std::span<const Matrix> shapes, const Matrix& features,
                                  FeatureDistance distance = FeatureDistance::Euclidean);

/// Chamfer distance for every unordered pair (i < j), row-major pair order.
std::vector<double> pairwise_chamfer(std::span<const Matrix> shapes);

/// Same correlation with precomputed pairwise_chamfer output, so several
/// feature spaces can be scored against one set of shapes.
double latent_distance_correlation(std::span<const double> chamfer_pairs, const Matrix& features,
                                   FeatureDistance distance = FeatureDistance::Euclidean);

} // namespace latent_align
