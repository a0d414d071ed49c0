#pragma once

#include "latent_align/matrix.hpp"

#include <filesystem>

namespace latent_align {

enum class Side { X, Y };

/// Canonical correlation model fitted on anchor pairs.
///
/// project(M, side) = (M - mean_side) * w_side. Columns are ordered by
/// descending canonical correlation and the first non-negligible entry of each
/// w_x column is positive (w_y columns are flipped together with w_x).
struct CcaModel {
    Matrix w_x;          ///< p x k
    Matrix w_y;          ///< q x k
    Vector mean_x;       ///< p
    Vector mean_y;       ///< q
    Vector correlations; ///< k, descending
    double ridge = 0.0;  ///< relative ridge used at fit time
    /// Inputs were scaled to unit variance before fitting; the scaling is folded
    /// into w_x and w_y so projection is unchanged.
    bool standardized = false;

    /// Canonical variates of the training anchors, computed on the whitening
    /// path at fit time. Not persisted.
    Matrix anchor_variates_x;
    Matrix anchor_variates_y;

    Index dim() const noexcept { return static_cast<Index>(w_x.cols()); }
    Index input_dim(Side side) const noexcept {
        return static_cast<Index>(side == Side::X ? w_x.rows() : w_y.rows());
    }

    /// Keep the leading k components (the solution for smaller k is nested).
    CcaModel truncated(Index k) const;
};

struct CcaOptions {
    /// Relative ridge: ridge * mean(diag(Sigma)) is added to each diagonal
    /// covariance block. 0 disables regularization.
    double ridge = 1e-6;
    /// Scale columns to unit variance before fitting (centering always happens).
    bool standardize = false;
};

/// Fit CCA on row-aligned anchors. Throws InvalidRank unless
/// 1 <= k <= min(p, q, n_A - 1), SingularCovariance when a covariance block is
/// rank deficient and ridge is 0.
CcaModel fit_cca(const Matrix& x_anchor, const Matrix& y_anchor, Index k,
                 const CcaOptions& options = {});

/// Project a matrix from one side into the shared k-dimensional space.
Matrix project(const CcaModel& model, const Matrix& m, Side side);

/// Bundle: <dir>/cca.json (metadata, means, correlations) plus w_x.npy, w_y.npy.
void save_cca(const std::filesystem::path& dir, const CcaModel& model);
CcaModel load_cca(const std::filesystem::path& dir);

} // namespace latent_align
