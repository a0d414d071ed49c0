#include "latent_align/matrix.hpp"

#include "latent_align/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace latent_align {

void require_finite(const Matrix& m, std::string_view what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (!std::isfinite(m(i, j))) {
                throw CellError(static_cast<Index>(i), static_cast<Index>(j),
                                std::string(what) + ": non-finite value at (" + std::to_string(i) +
                                    ", " + std::to_string(j) + ")");
            }
        }
    }
}

Matrix make_matrix(Index rows, Index cols, std::span<const double> data) {
    if (data.size() != rows * cols) {
        fail(ErrorKind::InvalidShape, "data length " + std::to_string(data.size()) +
                                          " does not match " + std::to_string(rows) + "x" +
                                          std::to_string(cols));
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::copy(data.begin(), data.end(), m.data());
    require_finite(m);
    return m;
}

Vector column_means(const Matrix& m) {
    if (m.rows() == 0) {
        fail(ErrorKind::InvalidShape, "column means of an empty matrix");
    }
    Vector means = Vector::Zero(m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            means[j] += m(i, j);
        }
    }
    means /= static_cast<double>(m.rows());
    return means;
}

Centered center_columns(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) {
        fail(ErrorKind::InvalidShape, "cannot center an empty matrix");
    }
    Centered out{m, column_means(m)};
    out.data.rowwise() -= out.means.transpose();
    return out;
}

Standardized standardize_columns(const Matrix& m) {
    if (m.rows() < 2) {
        fail(ErrorKind::InvalidShape, "standardization needs at least 2 rows, got " +
                                          std::to_string(m.rows()));
    }
    Centered c = center_columns(m);
    const auto n = static_cast<double>(m.rows());
    Vector stds(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        double ss = 0.0;
        double scale = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            ss += c.data(i, j) * c.data(i, j);
            scale = std::max(scale, std::abs(m(i, j)));
        }
        const double sd = std::sqrt(ss / (n - 1.0));
        // Constant columns can leave rounding residue after centering.
        const bool degenerate = sd == 0.0 || sd <= 1e-13 * scale;
        stds[j] = degenerate ? 1.0 : sd;
        if (degenerate) {
            c.data.col(j).setZero();
        }
    }
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        c.data.col(j) /= stds[j];
    }
    return {std::move(c.data), std::move(c.means), std::move(stds)};
}

Matrix apply_standardization(const Matrix& m, const Vector& means, const Vector& stds) {
    if (m.cols() != means.size() || m.cols() != stds.size()) {
        fail(ErrorKind::InvalidShape, "standardization statistics have " +
                                          std::to_string(means.size()) + " columns, input has " +
                                          std::to_string(m.cols()));
    }
    Matrix out = m;
    out.rowwise() -= means.transpose();
    out.array().rowwise() /= stds.transpose().array();
    return out;
}

Matrix undo_standardization(const Matrix& m, const Vector& means, const Vector& stds) {
    if (m.cols() != means.size() || m.cols() != stds.size()) {
        fail(ErrorKind::InvalidShape, "standardization statistics have " +
                                          std::to_string(means.size()) + " columns, input has " +
                                          std::to_string(m.cols()));
    }
    Matrix out = m;
    out.array().rowwise() *= stds.transpose().array();
    out.rowwise() += means.transpose();
    return out;
}

Matrix zero_pad_columns(const Matrix& m, Index target_cols) {
    const auto cols = static_cast<Index>(m.cols());
    if (target_cols < cols) {
        fail(ErrorKind::InvalidShape, "cannot pad " + std::to_string(cols) + " columns down to " +
                                          std::to_string(target_cols));
    }
    Matrix out = Matrix::Zero(m.rows(), static_cast<Eigen::Index>(target_cols));
    out.leftCols(m.cols()) = m;
    return out;
}

namespace {

Vector row_norms(const Matrix& m, std::string_view which) {
    Vector norms(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        norms[i] = m.row(i).norm();
        if (norms[i] == 0.0) {
            throw DegenerateRowError(static_cast<Index>(i),
                                     std::string(which) + " row " + std::to_string(i) +
                                         " has zero norm");
        }
    }
    return norms;
}

} // namespace

Matrix pairwise_cosine(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        fail(ErrorKind::InvalidShape, "cosine similarity needs equal widths, got " +
                                          std::to_string(a.cols()) + " and " +
                                          std::to_string(b.cols()));
    }
    const Vector na = row_norms(a, "left");
    const Vector nb = row_norms(b, "right");
    Matrix s = a * b.transpose();
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        for (Eigen::Index j = 0; j < s.cols(); ++j) {
            s(i, j) = std::clamp(s(i, j) / (na[i] * nb[j]), -1.0, 1.0);
        }
    }
    return s;
}

Matrix pairwise_euclidean(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        fail(ErrorKind::InvalidShape, "distance needs equal widths");
    }
    Matrix d(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            d(i, j) = (a.row(i) - b.row(j)).norm();
        }
    }
    return d;
}

Matrix select_rows(const Matrix& m, std::span<const Index> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (Index r = 0; r < rows.size(); ++r) {
        if (rows[r] >= static_cast<Index>(m.rows())) {
            fail(ErrorKind::InvalidShape, "row index " + std::to_string(rows[r]) +
                                              " out of range for " + std::to_string(m.rows()) +
                                              " rows");
        }
        out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

} // namespace latent_align
