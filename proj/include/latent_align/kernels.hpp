#pragma once

// Kernel matrices, HSIC, CKA and local CKA.
//
//   HSIC(K, L) = tr(K H L H) / (n - 1)^2,  H = I - 11^T / n
//   CKA(K, L)  = HSIC(K, L) / sqrt(HSIC(K, K) HSIC(L, L))
//
// Local CKA scores a candidate pair (x, y) by the CKA of the anchor sets with
// the pair appended as one extra sample. H is never formed explicitly.

#include "latent_align/matrix.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace latent_align {

enum class KernelKind { Linear, Rbf };

struct KernelSpec {
    KernelKind kind = KernelKind::Linear;
    /// RBF bandwidth in exp(-gamma * |a - b|^2). Unset means the median
    /// heuristic gamma = 1 / (2 * median pairwise squared distance), resolved
    /// separately for each side from the data it is applied to.
    std::optional<double> gamma;

    static KernelSpec linear() { return {}; }
    static KernelSpec rbf(std::optional<double> gamma = std::nullopt) {
        return {KernelKind::Rbf, gamma};
    }

    /// Throws InvalidArgument when an explicit RBF gamma is not positive.
    void validate() const;
};

/// "linear" or "rbf".
KernelKind parse_kernel_kind(std::string_view name);
std::string_view kernel_kind_name(KernelKind kind) noexcept;

/// Median-heuristic gamma over the first min(rows, 2000) rows.
double median_heuristic_gamma(const Matrix& x);

/// Concrete spec for data `x`: fills an unset RBF gamma by the median heuristic.
KernelSpec resolve_kernel(const KernelSpec& spec, const Matrix& x);

Matrix gram(const Matrix& x, const KernelSpec& spec);

/// HSIC via double-centering. K and L must be square, equally sized (n >= 2)
/// and symmetric within 1e-8 (relative to their largest entry).
double hsic(const Matrix& k, const Matrix& l);

/// CKA from precomputed kernel matrices. Throws DegenerateKernel when either
/// kernel has (numerically) zero self-HSIC.
double cka_from_grams(const Matrix& k, const Matrix& l);

/// CKA between feature matrices with the same kernel family on both sides.
/// Linear kernels use the feature-space identity tr(KHLH) = |Xc^T Yc|_F^2, so
/// no n x n matrix is formed.
double cka(const Matrix& x, const Matrix& y, const KernelSpec& spec = KernelSpec::linear());

/// Local CKA of a single candidate pair against aligned anchors (rows of x_anchor
/// and y_anchor correspond). Throws InsufficientAnchors when fewer than 2 anchors.
double local_cka(const Vector& x_query, const Vector& y_query, const Matrix& x_anchor,
                 const Matrix& y_anchor, const KernelSpec& spec = KernelSpec::linear());

/// Local CKA for every (row of x_queries, row of y_queries) pair.
///
/// Anchor-only terms (kernel row sums, grand sums and the anchor cross term
/// sum K_ij L_ij) are computed once; each query contributes a kernel vector
/// against the anchors, and the per-pair coupling is one matrix product.
/// Cost: O(n_A^2 (p + q)) once, O(n_A (q_x p + q_y q)) per query set and
/// O(q_x q_y n_A) for the full grid.
Matrix local_cka_matrix(const Matrix& x_queries, const Matrix& y_queries, const Matrix& x_anchor,
                        const Matrix& y_anchor, const KernelSpec& spec = KernelSpec::linear());

} // namespace latent_align
