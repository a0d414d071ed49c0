#include "latent_align/synth.hpp"

#include "latent_align/error.hpp"
#include "latent_align/random.hpp"

#include <Eigen/QR>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

namespace latent_align {

namespace {

Matrix gaussian(Index rows, Index cols, SplitMix64& rng) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.normal();
    }
    return m;
}

/// n x dim noise with covariance V diag(lambda) V^T, lambda_i ~ 1/(i+1), mean 1.
Matrix structured_noise(Index n, Index dim, SplitMix64& rng) {
    if (dim == 0) {
        return Matrix(static_cast<Eigen::Index>(n), 0);
    }
    const Eigen::MatrixXd basis_seed = gaussian(dim, dim, rng);
    const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(basis_seed).householderQ();
    Vector scale(static_cast<Eigen::Index>(dim));
    double total = 0.0;
    for (Eigen::Index i = 0; i < scale.size(); ++i) {
        scale[i] = 1.0 / static_cast<double>(i + 1);
        total += scale[i];
    }
    scale *= static_cast<double>(dim) / total;
    Matrix white = gaussian(n, dim, rng);
    white.array().rowwise() *= scale.cwiseSqrt().transpose().array();
    return white * basis.transpose();
}

} // namespace

SynthData synth_generate_with_latents(const SynthOptions& o) {
    if (o.n == 0 || o.p == 0 || o.q == 0) {
        fail(ErrorKind::InvalidShape, "synthetic data needs n, p, q >= 1");
    }
    if (o.k_shared > std::min(o.p, o.q)) {
        fail(ErrorKind::InvalidShape, "k_shared " + std::to_string(o.k_shared) +
                                          " exceeds min(p, q) = " +
                                          std::to_string(std::min(o.p, o.q)));
    }
    if (!(o.noise_sigma >= 0.0) || !std::isfinite(o.noise_sigma)) {
        fail(ErrorKind::InvalidShape, "noise_sigma must be non-negative");
    }

    SplitMix64 root(o.seed);
    SplitMix64 latent_rng = root.fork(1);
    SplitMix64 mix_rng = root.fork(2);
    SplitMix64 noise_x_rng = root.fork(3);
    SplitMix64 noise_y_rng = root.fork(4);

    SynthData out;
    out.latents = gaussian(o.n, o.k_shared, latent_rng);
    const double mix_scale = o.k_shared == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(o.k_shared));
    const Matrix a = gaussian(o.k_shared, o.p, mix_rng) * mix_scale;
    const Matrix b = gaussian(o.k_shared, o.q, mix_rng) * mix_scale;

    Matrix x = out.latents * a;
    Matrix y = out.latents * b;
    if (o.noise_sigma > 0.0) {
        x += o.noise_sigma * structured_noise(o.n, o.p, noise_x_rng);
        y += o.noise_sigma * structured_noise(o.n, o.q, noise_y_rng);
    }

    std::vector<std::string> ids;
    ids.reserve(o.n);
    char buf[32];
    for (Index i = 0; i < o.n; ++i) {
        std::snprintf(buf, sizeof buf, "s%06zu", i);
        ids.emplace_back(buf);
    }
    out.data.x = EmbeddingSet{ids, std::move(x), "3d"};
    out.data.y = EmbeddingSet{std::move(ids), std::move(y), "text"};
    return out;
}

PairedDataset synth_generate(Index n, Index p, Index q, Index k_shared, double noise_sigma,
                             std::uint64_t seed) {
    return synth_generate_with_latents({n, p, q, k_shared, noise_sigma, seed}).data;
}

std::vector<Matrix> synth_shapes(const Matrix& latents, std::span<const Index> rows, Index points) {
    if (points == 0) {
        fail(ErrorKind::InvalidShape, "shapes need at least one point");
    }
    const auto m = static_cast<Eigen::Index>(points);
    Matrix sphere(m, 3);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (Eigen::Index i = 0; i < m; ++i) {
        const double z = m == 1 ? 0.0 : 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(m);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double t = golden * static_cast<double>(i);
        sphere.row(i) << r * std::cos(t), r * std::sin(t), z;
    }

    const Eigen::Index factors = std::min<Eigen::Index>(3, latents.cols());
    std::vector<Matrix> shapes;
    shapes.reserve(rows.size());
    for (Index row : rows) {
        if (row >= static_cast<Index>(latents.rows())) {
            fail(ErrorKind::InvalidShape, "latent row out of range");
        }
        Eigen::RowVector3d stretch = Eigen::RowVector3d::Ones();
        for (Eigen::Index a = 0; a < factors; ++a) {
            stretch[a] = std::exp(0.3 * latents(static_cast<Eigen::Index>(row), a));
        }
        Matrix cloud = sphere;
        cloud.array().rowwise() *= stretch.array();
        shapes.push_back(std::move(cloud));
    }
    return shapes;
}

} // namespace latent_align
