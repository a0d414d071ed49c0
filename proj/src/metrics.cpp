#include "latent_align/metrics.hpp"

#include "latent_align/error.hpp"
#include "latent_align/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace latent_align {

AssignmentResult hungarian(const Matrix& cost) {
    if (cost.rows() != cost.cols()) {
        fail(ErrorKind::InvalidShape, "assignment needs a square cost matrix, got " +
                                          std::to_string(cost.rows()) + "x" +
                                          std::to_string(cost.cols()));
    }
    require_finite(cost, "cost matrix");
    const auto n = static_cast<Index>(cost.rows());
    constexpr double inf = std::numeric_limits<double>::infinity();

    // 1-based potentials; column 0 is the virtual source of each augmentation.
    std::vector<double> u(n + 1, 0.0);
    std::vector<double> v(n + 1, 0.0);
    std::vector<Index> row_of(n + 1, 0); // row matched to column j (0 = free)
    std::vector<Index> way(n + 1, 0);
    std::vector<double> min_slack(n + 1);
    std::vector<char> used(n + 1);

    for (Index i = 1; i <= n; ++i) {
        row_of[0] = i;
        Index j0 = 0;
        std::fill(min_slack.begin(), min_slack.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const Index i0 = row_of[j0];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (used[j]) {
                    continue;
                }
                const double slack = cost(static_cast<Eigen::Index>(i0 - 1),
                                          static_cast<Eigen::Index>(j - 1)) -
                                     u[i0] - v[j];
                if (slack < min_slack[j]) {
                    min_slack[j] = slack;
                    way[j] = j0;
                }
                if (min_slack[j] < delta) {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of[j0] != 0);
        do {
            const Index j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    AssignmentResult result;
    result.permutation.assign(n, 0);
    for (Index j = 1; j <= n; ++j) {
        result.permutation[row_of[j] - 1] = j - 1;
    }
    for (Index i = 0; i < n; ++i) {
        result.total_cost += cost(static_cast<Eigen::Index>(i),
                                  static_cast<Eigen::Index>(result.permutation[i]));
    }
    return result;
}

MatchingResult matching_accuracy(const Matrix& similarity) {
    MatchingResult out;
    out.assignment = hungarian(-similarity);
    const Index n = out.assignment.permutation.size();
    Index correct = 0;
    for (Index i = 0; i < n; ++i) {
        correct += out.assignment.permutation[i] == i ? 1 : 0;
    }
    out.accuracy = n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
    return out;
}

std::map<Index, double> topk_retrieval(const Matrix& similarity, std::span<const Index> ks) {
    if (similarity.rows() != similarity.cols()) {
        fail(ErrorKind::InvalidShape, "retrieval needs a square similarity matrix");
    }
    const auto q = static_cast<Index>(similarity.rows());
    for (Index k : ks) {
        if (k == 0 || k > q) {
            fail(ErrorKind::InvalidK, "k=" + std::to_string(k) + " outside [1, " +
                                          std::to_string(q) + "]");
        }
    }
    // rank[i] = number of candidates ordered before the true partner.
    std::vector<Index> rank(q, 0);
    for (Index i = 0; i < q; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double truth = similarity(ii, ii);
        Index ahead = 0;
        for (Index j = 0; j < q; ++j) {
            const double s = similarity(ii, static_cast<Eigen::Index>(j));
            if (s > truth || (s == truth && j < i)) {
                ++ahead;
            }
        }
        rank[i] = ahead;
    }
    std::map<Index, double> out;
    for (Index k : ks) {
        Index hits = 0;
        for (Index r : rank) {
            hits += r < k ? 1 : 0;
        }
        out[k] = static_cast<double>(hits) / static_cast<double>(q);
    }
    return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        fail(ErrorKind::InvalidShape, "pearson needs equal lengths");
    }
    if (a.size() < 2) {
        fail(ErrorKind::InvalidShape, "pearson needs at least 2 values");
    }
    const auto n = static_cast<double>(a.size());
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) {
        fail(ErrorKind::DegenerateCorrelation, "pearson correlation of a constant sequence");
    }
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

namespace {

double directed_chamfer(const Matrix& from, const Matrix& to) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < from.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < to.rows(); ++j) {
            best = std::min(best, (from.row(i) - to.row(j)).squaredNorm());
        }
        sum += best;
    }
    return sum / static_cast<double>(from.rows());
}

} // namespace

double chamfer_distance(const Matrix& p, const Matrix& q) {
    if (p.rows() == 0 || q.rows() == 0) {
        fail(ErrorKind::InvalidShape, "chamfer distance of an empty point set");
    }
    if (p.cols() != q.cols()) {
        fail(ErrorKind::InvalidShape, "point sets have different dimensions");
    }
    return directed_chamfer(p, q) + directed_chamfer(q, p);
}

std::vector<double> pairwise_chamfer(std::span<const Matrix> shapes) {
    const Index n = shapes.size();
    std::vector<double> out(n < 2 ? 0 : n * (n - 1) / 2);
    parallel_for(n, [&](std::size_t i) {
        // Offset of pair (i, i+1) in row-major upper-triangle order.
        std::size_t idx = i * n - i * (i + 1) / 2;
        for (Index j = i + 1; j < n; ++j) {
            out[idx++] = chamfer_distance(shapes[i], shapes[j]);
        }
    });
    return out;
}

double latent_distance_correlation(std::span<const double> chamfer_pairs, const Matrix& features,
                                   FeatureDistance distance) {
    const auto n = static_cast<Index>(features.rows());
    if (n < 2) {
        fail(ErrorKind::InvalidShape, "need at least 2 samples for pairwise correlation");
    }
    if (chamfer_pairs.size() != n * (n - 1) / 2) {
        fail(ErrorKind::InvalidShape, "shape count does not match feature rows");
    }
    Matrix d = distance == FeatureDistance::Euclidean ? pairwise_euclidean(features, features)
                                                      : pairwise_cosine(features, features);
    std::vector<double> latent;
    latent.reserve(chamfer_pairs.size());
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            const double v = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            latent.push_back(distance == FeatureDistance::Euclidean ? v : 1.0 - v);
        }
    }
    return pearson(chamfer_pairs, latent);
}

double chamfer_latent_correlation(std::span<const Matrix> shapes, const Matrix& features,
                                  FeatureDistance distance) {
    if (shapes.size() != static_cast<Index>(features.rows())) {
        fail(ErrorKind::InvalidShape, std::to_string(shapes.size()) + " shapes but " +
                                          std::to_string(features.rows()) + " feature rows");
    }
    const std::vector<double> chamfer = pairwise_chamfer(shapes);
    return latent_distance_correlation(chamfer, features, distance);
}

} // namespace latent_align
