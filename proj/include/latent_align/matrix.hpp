#pragma once

// Shared numerical primitives: the dense matrix carrier plus the column
// statistics every alignment stage relies on.
//
// Reductions run sequentially down each column (row 0 first), so results are
// bit-stable for a given input regardless of the thread count used elsewhere.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace latent_align {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = std::size_t;

/// Throws DataError (as CellError) at the first non-finite entry.
void require_finite(const Matrix& m, std::string_view what = "matrix");

/// Build a validated matrix from row-major data; data.size() must equal rows*cols.
Matrix make_matrix(Index rows, Index cols, std::span<const double> data);

struct Centered {
    Matrix data;
    Vector means;
};

struct Standardized {
    Matrix data;
    Vector means;
    Vector stds;
};

/// Subtract per-column means. Throws InvalidShape on an empty matrix.
Centered center_columns(const Matrix& m);

/// Column means with a sequential per-column reduction.
Vector column_means(const Matrix& m);

/// Zero mean, unit sample (n-1) standard deviation per column. Columns with zero
/// variance map to zeros and record a std of 1.
Standardized standardize_columns(const Matrix& m);

/// Apply previously computed standardization statistics.
Matrix apply_standardization(const Matrix& m, const Vector& means, const Vector& stds);

/// Inverse of apply_standardization.
Matrix undo_standardization(const Matrix& m, const Vector& means, const Vector& stds);

/// Append zero columns until the matrix has target_cols columns.
Matrix zero_pad_columns(const Matrix& m, Index target_cols);

/// Cosine similarity between every row of a and every row of b.
Matrix pairwise_cosine(const Matrix& a, const Matrix& b);

/// Copy the listed rows, in order.
Matrix select_rows(const Matrix& m, std::span<const Index> rows);

/// Euclidean distance between every row of a and every row of b.
Matrix pairwise_euclidean(const Matrix& a, const Matrix& b);

} // namespace latent_align
