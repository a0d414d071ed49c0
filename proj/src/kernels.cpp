#include "latent_align/kernels.hpp"

#include "latent_align/error.hpp"
#include "latent_align/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace latent_align {

void KernelSpec::validate() const {
    if (kind == KernelKind::Rbf && gamma && !(*gamma > 0.0 && std::isfinite(*gamma))) {
        fail(ErrorKind::InvalidArgument, "rbf gamma must be positive, got " + std::to_string(*gamma));
    }
}

KernelKind parse_kernel_kind(std::string_view name) {
    if (name == "linear") {
        return KernelKind::Linear;
    }
    if (name == "rbf") {
        return KernelKind::Rbf;
    }
    fail(ErrorKind::InvalidArgument, "unknown kernel '" + std::string(name) + "'");
}

std::string_view kernel_kind_name(KernelKind kind) noexcept {
    return kind == KernelKind::Linear ? "linear" : "rbf";
}

double median_heuristic_gamma(const Matrix& x) {
    const Eigen::Index n = std::min<Eigen::Index>(x.rows(), 2000);
    std::vector<double> d2;
    d2.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            d2.push_back((x.row(i) - x.row(j)).squaredNorm());
        }
    }
    if (d2.empty()) {
        return 1.0;
    }
    const auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
    std::nth_element(d2.begin(), mid, d2.end());
    double median = *mid;
    if (d2.size() % 2 == 0) {
        median = 0.5 * (median + *std::max_element(d2.begin(), mid));
    }
    return median > 0.0 ? 1.0 / (2.0 * median) : 1.0;
}

KernelSpec resolve_kernel(const KernelSpec& spec, const Matrix& x) {
    spec.validate();
    if (spec.kind == KernelKind::Rbf && !spec.gamma) {
        return KernelSpec::rbf(median_heuristic_gamma(x));
    }
    return spec;
}

namespace {

/// Kernel between every row of a and every row of b for a resolved spec.
Matrix kernel_cross(const Matrix& a, const Matrix& b, const KernelSpec& spec) {
    if (spec.kind == KernelKind::Linear) {
        return a * b.transpose();
    }
    const double gamma = *spec.gamma;
    Matrix k(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            k(i, j) = std::exp(-gamma * (a.row(i) - b.row(j)).squaredNorm());
        }
    }
    return k;
}

void require_square_pair(const Matrix& k, const Matrix& l) {
    if (k.rows() != k.cols() || l.rows() != l.cols() || k.rows() != l.rows()) {
        fail(ErrorKind::InvalidShape, "HSIC needs two square kernels of equal size, got " +
                                          std::to_string(k.rows()) + "x" + std::to_string(k.cols()) +
                                          " and " + std::to_string(l.rows()) + "x" +
                                          std::to_string(l.cols()));
    }
    if (k.rows() < 2) {
        fail(ErrorKind::InvalidShape, "HSIC needs at least 2 samples");
    }
}

void require_symmetric(const Matrix& k, std::string_view which) {
    const double tol = 1e-8 * std::max(1.0, k.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < k.cols(); ++j) {
            if (std::abs(k(i, j) - k(j, i)) > tol) {
                fail(ErrorKind::InvalidShape, std::string(which) + " kernel is not symmetric at (" +
                                                  std::to_string(i) + ", " + std::to_string(j) +
                                                  ")");
            }
        }
    }
}

Matrix double_center(const Matrix& k) {
    const Vector row_mean = k.rowwise().mean();
    const Vector col_mean = k.colwise().mean().transpose();
    const double grand = row_mean.mean();
    Matrix c = k;
    c.colwise() -= row_mean;
    c.rowwise() -= col_mean.transpose();
    c.array() += grand;
    return c;
}

/// Zero self-HSIC relative to the kernel's own magnitude.
bool degenerate_self(double centered_norm, double raw_norm) {
    return !(centered_norm > 1e-12 * raw_norm) || raw_norm == 0.0;
}

void require_anchor_shapes(const Matrix& xq, const Matrix& yq, const Matrix& xa,
                           const Matrix& ya) {
    if (xa.rows() != ya.rows()) {
        fail(ErrorKind::InvalidShape, "anchor sets differ in size: " + std::to_string(xa.rows()) +
                                          " vs " + std::to_string(ya.rows()));
    }
    if (xa.rows() < 2) {
        fail(ErrorKind::InsufficientAnchors, "local CKA needs at least 2 anchors, got " +
                                                 std::to_string(xa.rows()));
    }
    if (xq.cols() != xa.cols() || yq.cols() != ya.cols()) {
        fail(ErrorKind::InvalidShape, "query width does not match anchor width");
    }
    if (xq.rows() == 0 || yq.rows() == 0) {
        fail(ErrorKind::InvalidShape, "local CKA needs at least one query on each side");
    }
}

/// Anchor statistics for one side of local CKA.
struct AnchorSide {
    Vector row_sums;   ///< sum_j K_ij over anchors
    double total = 0;  ///< sum_ij K_ij
    double self = 0;   ///< sum_ij K_ij^2
    double row_sq = 0; ///< sum_i (row_sums_i)^2
};

/// Per-query terms: kernel vector against anchors and derived scalars.
struct QuerySide {
    Matrix vectors;  ///< queries x anchors
    Vector diag;     ///< k(q, q)
    Vector sums;     ///< sum_i k(a_i, q)
    Vector with_row; ///< sum_i row_sums_i * k(a_i, q)
    Vector self_hsic;
};

QuerySide query_terms(const Matrix& queries, const Matrix& anchors, const AnchorSide& side,
                      const KernelSpec& spec) {
    const auto n = static_cast<double>(anchors.rows() + 1);
    QuerySide q;
    q.vectors = kernel_cross(queries, anchors, spec);
    q.diag.resize(queries.rows());
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        q.diag[i] = spec.kind == KernelKind::Linear ? queries.row(i).squaredNorm() : 1.0;
    }
    q.sums = q.vectors.rowwise().sum();
    q.with_row = q.vectors * side.row_sums;
    q.self_hsic.resize(queries.rows());
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const double kk = q.vectors.row(i).squaredNorm();
        const double d = q.diag[i];
        const double s = q.sums[i];
        const double sum_prod = side.self + 2.0 * kk + d * d;
        const double row_prod = side.row_sq + 2.0 * q.with_row[i] + kk + (s + d) * (s + d);
        const double tot = side.total + 2.0 * s + d;
        q.self_hsic[i] = sum_prod - 2.0 / n * row_prod + tot * tot / (n * n);
    }
    return q;
}

} // namespace

Matrix gram(const Matrix& x, const KernelSpec& spec) {
    if (x.rows() < 1) {
        fail(ErrorKind::InvalidShape, "gram matrix of an empty set");
    }
    const KernelSpec resolved = resolve_kernel(spec, x);
    Matrix k = kernel_cross(x, x, resolved);
    // Enforce exact symmetry; GEMM does not guarantee it bitwise.
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < k.cols(); ++j) {
            k(j, i) = k(i, j);
        }
    }
    return k;
}

double hsic(const Matrix& k, const Matrix& l) {
    require_square_pair(k, l);
    require_symmetric(k, "first");
    require_symmetric(l, "second");
    const double n1 = static_cast<double>(k.rows() - 1);
    return double_center(k).cwiseProduct(l).sum() / (n1 * n1);
}

double cka_from_grams(const Matrix& k, const Matrix& l) {
    require_square_pair(k, l);
    const Matrix kc = double_center(k);
    const Matrix lc = double_center(l);
    const double kk = kc.squaredNorm();
    const double ll = lc.squaredNorm();
    if (degenerate_self(std::sqrt(kk), k.norm()) || degenerate_self(std::sqrt(ll), l.norm())) {
        fail(ErrorKind::DegenerateKernel, "kernel has zero self-HSIC (constant features)");
    }
    return kc.cwiseProduct(l).sum() / std::sqrt(kk * ll);
}

double cka(const Matrix& x, const Matrix& y, const KernelSpec& spec) {
    if (x.rows() != y.rows()) {
        fail(ErrorKind::InvalidShape, "CKA needs equal sample counts, got " +
                                          std::to_string(x.rows()) + " and " +
                                          std::to_string(y.rows()));
    }
    if (x.rows() < 2) {
        fail(ErrorKind::InvalidShape, "CKA needs at least 2 samples");
    }
    spec.validate();
    if (spec.kind == KernelKind::Rbf) {
        return cka_from_grams(gram(x, spec), gram(y, spec));
    }
    const Matrix xc = center_columns(x).data;
    const Matrix yc = center_columns(y).data;
    const double xy = (xc.transpose() * yc).squaredNorm();
    const double xx = (xc.transpose() * xc).squaredNorm();
    const double yy = (yc.transpose() * yc).squaredNorm();
    const double x_raw = (x.transpose() * x).norm();
    const double y_raw = (y.transpose() * y).norm();
    if (degenerate_self(std::sqrt(xx), x_raw) || degenerate_self(std::sqrt(yy), y_raw)) {
        fail(ErrorKind::DegenerateKernel, "kernel has zero self-HSIC (constant features)");
    }
    return xy / std::sqrt(xx * yy);
}

Matrix local_cka_matrix(const Matrix& x_queries, const Matrix& y_queries, const Matrix& x_anchor,
                        const Matrix& y_anchor, const KernelSpec& spec) {
    require_anchor_shapes(x_queries, y_queries, x_anchor, y_anchor);
    spec.validate();
    const KernelSpec kx = resolve_kernel(spec, x_anchor);
    const KernelSpec ky = resolve_kernel(spec, y_anchor);

    // A common shift leaves H K H unchanged for the linear kernel; shifting by the
    // anchor mean keeps the expanded sums below from cancelling catastrophically.
    Matrix xa = x_anchor;
    Matrix ya = y_anchor;
    Matrix xq = x_queries;
    Matrix yq = y_queries;
    if (spec.kind == KernelKind::Linear) {
        const Vector mx = column_means(x_anchor);
        const Vector my = column_means(y_anchor);
        xa.rowwise() -= mx.transpose();
        xq.rowwise() -= mx.transpose();
        ya.rowwise() -= my.transpose();
        yq.rowwise() -= my.transpose();
    }

    const Eigen::Index na = xa.rows();
    AnchorSide ax;
    AnchorSide ay;
    ax.row_sums = Vector::Zero(na);
    ay.row_sums = Vector::Zero(na);
    double cross = 0.0; // sum_ij K_ij L_ij over anchors
    constexpr Eigen::Index kBlock = 256;
    for (Eigen::Index start = 0; start < na; start += kBlock) {
        const Eigen::Index len = std::min(kBlock, na - start);
        const Matrix kb = kernel_cross(xa.middleRows(start, len), xa, kx);
        const Matrix lb = kernel_cross(ya.middleRows(start, len), ya, ky);
        ax.row_sums.segment(start, len) = kb.rowwise().sum();
        ay.row_sums.segment(start, len) = lb.rowwise().sum();
        ax.self += kb.squaredNorm();
        ay.self += lb.squaredNorm();
        cross += kb.cwiseProduct(lb).sum();
    }
    ax.total = ax.row_sums.sum();
    ay.total = ay.row_sums.sum();
    ax.row_sq = ax.row_sums.squaredNorm();
    ay.row_sq = ay.row_sums.squaredNorm();
    const double rows_xy = ax.row_sums.dot(ay.row_sums);

    const QuerySide qx = query_terms(xq, xa, ax, kx);
    const QuerySide qy = query_terms(yq, ya, ay, ky);
    for (Eigen::Index i = 0; i < qx.self_hsic.size(); ++i) {
        if (!(qx.self_hsic[i] > 1e-12 * std::abs(ax.self))) {
            fail(ErrorKind::DegenerateKernel, "x-side augmented kernel has zero self-HSIC");
        }
    }
    for (Eigen::Index j = 0; j < qy.self_hsic.size(); ++j) {
        if (!(qy.self_hsic[j] > 1e-12 * std::abs(ay.self))) {
            fail(ErrorKind::DegenerateKernel, "y-side augmented kernel has zero self-HSIC");
        }
    }

    // k_i . l_j for every query pair.
    const Matrix coupling = qx.vectors * qy.vectors.transpose();
    // sum_a k_i(a) * rowsum_L(a), and the mirror term.
    const Vector x_with_y_rows = qx.vectors * ay.row_sums;
    const Vector y_with_x_rows = qy.vectors * ax.row_sums;

    const auto n = static_cast<double>(na + 1);
    Matrix out(xq.rows(), yq.rows());
    parallel_for(static_cast<std::size_t>(xq.rows()), [&](std::size_t ui) {
        const auto i = static_cast<Eigen::Index>(ui);
        const double dk = qx.diag[i];
        const double sk = qx.sums[i];
        for (Eigen::Index j = 0; j < yq.rows(); ++j) {
            const double dl = qy.diag[j];
            const double sl = qy.sums[j];
            const double kl = coupling(i, j);
            const double sum_prod = cross + 2.0 * kl + dk * dl;
            const double row_prod =
                rows_xy + y_with_x_rows[j] + x_with_y_rows[i] + kl + (sk + dk) * (sl + dl);
            const double tot = (ax.total + 2.0 * sk + dk) * (ay.total + 2.0 * sl + dl);
            const double h = sum_prod - 2.0 / n * row_prod + tot / (n * n);
            out(i, j) = h / std::sqrt(qx.self_hsic[i] * qy.self_hsic[j]);
        }
    });
    return out;
}

double local_cka(const Vector& x_query, const Vector& y_query, const Matrix& x_anchor,
                 const Matrix& y_anchor, const KernelSpec& spec) {
    const Matrix xq = x_query.transpose();
    const Matrix yq = y_query.transpose();
    return local_cka_matrix(xq, yq, x_anchor, y_anchor, spec)(0, 0);
}

} // namespace latent_align
