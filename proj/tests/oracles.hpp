#pragma once

// Slow, direct reference implementations used only by tests. Each one takes a
// different route from the library code it checks.

#include "latent_align/kernels.hpp"
#include "latent_align/matrix.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using latent_align::Matrix;
using Dense = Eigen::MatrixXd;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = nd(rng);
    }
    return m;
}

inline Dense centering(Eigen::Index n) {
    return Dense::Identity(n, n) - Dense::Constant(n, n, 1.0 / static_cast<double>(n));
}

/// tr(K H L H) / (n - 1)^2 with H formed explicitly.
inline double hsic(const Dense& k, const Dense& l) {
    const Eigen::Index n = k.rows();
    const Dense h = centering(n);
    return (k * h * l * h).trace() / static_cast<double>((n - 1) * (n - 1));
}

inline double cka(const Dense& k, const Dense& l) {
    return hsic(k, l) / std::sqrt(hsic(k, k) * hsic(l, l));
}

/// Kernel matrix by explicit double loop.
inline Dense gram(const Matrix& x, const latent_align::KernelSpec& spec) {
    const Eigen::Index n = x.rows();
    Dense k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (spec.kind == latent_align::KernelKind::Linear) {
                double s = 0.0;
                for (Eigen::Index c = 0; c < x.cols(); ++c) {
                    s += x(i, c) * x(j, c);
                }
                k(i, j) = s;
            } else {
                double d = 0.0;
                for (Eigen::Index c = 0; c < x.cols(); ++c) {
                    d += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
                }
                k(i, j) = std::exp(-*spec.gamma * d);
            }
        }
    }
    return k;
}

/// Local CKA: append the pair to the anchors and take plain CKA.
inline double local_cka(const Eigen::RowVectorXd& xq, const Eigen::RowVectorXd& yq,
                        const Matrix& xa, const Matrix& ya, const latent_align::KernelSpec& spec) {
    Matrix x(xa.rows() + 1, xa.cols());
    Matrix y(ya.rows() + 1, ya.cols());
    x << xa, xq;
    y << ya, yq;
    return oracle::cka(oracle::gram(x, spec), oracle::gram(y, spec));
}

/// Minimum total cost over all permutations.
inline double brute_force_assignment(const Matrix& cost) {
    std::vector<int> perm(static_cast<std::size_t>(cost.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            s += cost(static_cast<Eigen::Index>(i), perm[i]);
        }
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Accuracy of the best permutation (unique optimum assumed).
inline double brute_force_matching_accuracy(const Matrix& sim) {
    std::vector<int> perm(static_cast<std::size_t>(sim.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> arg;
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            s += sim(static_cast<Eigen::Index>(i), perm[i]);
        }
        if (s > best) {
            best = s;
            arg = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    int hits = 0;
    for (std::size_t i = 0; i < arg.size(); ++i) {
        hits += arg[i] == static_cast<int>(i) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(arg.size());
}

/// Top-k hit rate by fully sorting each row (descending, lower index first on ties).
inline double topk_by_sort(const Matrix& sim, std::size_t k) {
    const Eigen::Index q = sim.rows();
    int hits = 0;
    for (Eigen::Index i = 0; i < q; ++i) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(q));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return sim(i, a) > sim(i, b); });
        const auto pos = std::find(order.begin(), order.end(), i) - order.begin();
        hits += static_cast<std::size_t>(pos) < k ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(q);
}

/// Canonical correlations via Cholesky whitening: singular values of
/// Lx^-1 Sxy Ly^-T with S = L L^T (sample covariances, n - 1 divisor).
inline Eigen::VectorXd cca_correlations(const Matrix& x, const Matrix& y) {
    const Dense xc = x.rowwise() - x.colwise().mean();
    const Dense yc = y.rowwise() - y.colwise().mean();
    const double d = static_cast<double>(x.rows() - 1);
    const Dense sxx = xc.transpose() * xc / d;
    const Dense syy = yc.transpose() * yc / d;
    const Dense sxy = xc.transpose() * yc / d;
    const Eigen::LLT<Dense> lx(sxx);
    const Eigen::LLT<Dense> ly(syy);
    const Dense left = lx.matrixL().solve(sxy);
    const Dense m = ly.matrixL().solve(left.transpose()).transpose();
    return Eigen::JacobiSVD<Dense>(m).singularValues();
}

/// Affine least squares by the normal equations on [X | 1].
inline Dense lsq_affine(const Matrix& x, const Matrix& y) {
    Dense a(x.rows(), x.cols() + 1);
    a << Dense(x), Dense::Ones(x.rows(), 1);
    const Dense w = (a.transpose() * a).ldlt().solve(a.transpose() * Dense(y));
    return a * w;
}

/// Sample Pearson correlation in long double, two-pass.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    long double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<long double>(a.size());
    mb /= static_cast<long double>(b.size());
    long double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return static_cast<double>(sab / std::sqrt(saa * sbb));
}

inline Matrix random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
    const Dense g = random_matrix(n, n, rng);
    return Dense(Eigen::HouseholderQR<Dense>(g).householderQ());
}

} // namespace oracle
