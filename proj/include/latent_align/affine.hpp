#pragma once

#include "latent_align/matrix.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace latent_align {

struct ColumnStats {
    Vector means;
    Vector stds;
};

/// Affine translation T(x) = x R + b between two latent spaces.
///
/// Fitting works on a common width: the narrower side is zero-padded to the
/// wider one. When standardization is on, R and b live in standardized units
/// and apply() maps back to the target scale. Output is truncated to the
/// target's original width (padded target columns are identically zero).
struct AffineMap {
    Matrix r; ///< d_in x d_out
    Vector b; ///< d_out
    std::optional<ColumnStats> source_stats;
    std::optional<ColumnStats> target_stats;
    std::optional<Index> padded_from; ///< original source width when padded
    Index target_dim = 0;             ///< original target width
    double training_residual = 0.0;   ///< |T(X) - Y|_F on the fit data, target scale

    Index d_in() const noexcept { return static_cast<Index>(r.rows()); }
    Index d_out() const noexcept { return static_cast<Index>(r.cols()); }
};

AffineMap identity_affine(Index dim);

struct AffineOptions {
    bool with_bias = true;
    bool standardize = true;
};

/// Least squares: minimizes |X R + 1 b^T - Y|_F over the preprocessed data via
/// a complete orthogonal decomposition of the homogeneous design [X | 1]. A
/// rank-deficient design yields the minimum-norm solution. Throws
/// UnderDetermined when rows < d_in + 1.
AffineMap fit_affine_lsq(const Matrix& source, const Matrix& target,
                         const AffineOptions& options = {});

struct GradientDescentOptions {
    double learning_rate = 1e-2;
    std::size_t iterations = 10000;
    bool with_bias = true;
    bool standardize = true;
};

/// Full-batch gradient descent on loss = |A W - Y|_F^2 / (2n) from W = 0, where
/// A is the preprocessed design (with a ones column when with_bias). The loss is
/// non-increasing when learning_rate < 2 / L, L = affine_gd_lipschitz(...).
/// `losses`, when given, receives the loss after every update. Throws
/// DivergenceError at the first non-finite loss.
AffineMap fit_affine_gd(const Matrix& source, const Matrix& target,
                        const GradientDescentOptions& options = {},
                        std::vector<double>* losses = nullptr);

/// The objective fit_affine_gd descends, in Gram form. Parameters W stack R
/// over b (when with_bias) in the preprocessed units.
class AffineObjective {
public:
    AffineObjective(const Matrix& source, const Matrix& target,
                    const GradientDescentOptions& options = {});
    /// Objective of |A W - Y|^2 / (2n) for an already preprocessed design A.
    static AffineObjective from_design(const Eigen::MatrixXd& design, const Eigen::MatrixXd& target);
    double loss(const Eigen::MatrixXd& w) const;
    Eigen::MatrixXd gradient(const Eigen::MatrixXd& w) const;
    double lipschitz() const;
    Eigen::Index parameter_rows() const noexcept { return ata_.rows(); }
    Eigen::Index parameter_cols() const noexcept { return aty_.cols(); }

private:
    AffineObjective() = default;
    Eigen::MatrixXd ata_;
    Eigen::MatrixXd aty_;
    double yy_ = 0.0;
};

/// Largest eigenvalue of A^T A / n for the design fit_affine_gd would build.
double affine_gd_lipschitz(const Matrix& source, const Matrix& target,
                           const GradientDescentOptions& options = {});

/// Translate rows of x. Accepts the original or padded source width.
Matrix apply(const AffineMap& map, const Matrix& x);

/// Bundle: <dir>/affine.json plus r.npy.
void save_affine(const std::filesystem::path& dir, const AffineMap& map);
AffineMap load_affine(const std::filesystem::path& dir);

} // namespace latent_align
