#include "latent_align/affine.hpp"

#include "latent_align/error.hpp"
#include "latent_align/npy.hpp"

#include "json.hpp"

#include <Eigen/QR>

#include <cmath>
#include <fstream>
#include <string>

namespace latent_align {

namespace {

using ColMatrix = Eigen::MatrixXd;

/// Padded, optionally standardized fit data shared by both solvers.
struct Prepared {
    ColMatrix design; ///< n x (d + bias)
    ColMatrix target; ///< n x d
    AffineMap shell;  ///< map with everything but r, b and residual filled in
};

Prepared prepare(const Matrix& source, const Matrix& target, bool with_bias, bool standardize) {
    if (source.rows() != target.rows()) {
        fail(ErrorKind::InvalidShape, "source and target row counts differ: " +
                                          std::to_string(source.rows()) + " vs " +
                                          std::to_string(target.rows()));
    }
    const auto p = static_cast<Index>(source.cols());
    const auto q = static_cast<Index>(target.cols());
    const Index d = std::max(p, q);
    if (static_cast<Index>(source.rows()) < d + 1) {
        fail(ErrorKind::UnderDetermined, "affine fit needs at least " + std::to_string(d + 1) +
                                             " rows, got " + std::to_string(source.rows()));
    }

    Prepared prep;
    prep.shell.target_dim = q;
    if (p < d) {
        prep.shell.padded_from = p;
    }
    Matrix xs = zero_pad_columns(source, d);
    Matrix ys = zero_pad_columns(target, d);
    if (standardize) {
        Standardized sx = standardize_columns(xs);
        Standardized sy = standardize_columns(ys);
        prep.shell.source_stats = ColumnStats{sx.means, sx.stds};
        prep.shell.target_stats = ColumnStats{sy.means, sy.stds};
        xs = std::move(sx.data);
        ys = std::move(sy.data);
    }

    const auto di = static_cast<Eigen::Index>(d);
    prep.design.resize(xs.rows(), di + (with_bias ? 1 : 0));
    prep.design.leftCols(di) = xs;
    if (with_bias) {
        prep.design.col(di).setOnes();
    }
    prep.target = ys;
    return prep;
}

void finish(AffineMap& map, const ColMatrix& weights, const Prepared& prep) {
    const Eigen::Index d = prep.target.cols();
    map.r = weights.topRows(d);
    map.b = weights.rows() > d ? Vector(weights.row(d).transpose()) : Vector::Zero(d);

    // Residual on the solver's own fitted values, mapped back to target scale.
    ColMatrix resid = prep.design * weights - prep.target;
    if (map.target_stats) {
        resid = resid * map.target_stats->stds.asDiagonal();
    }
    map.training_residual = resid.leftCols(static_cast<Eigen::Index>(map.target_dim)).norm();
}

} // namespace

AffineMap identity_affine(Index dim) {
    AffineMap map;
    const auto d = static_cast<Eigen::Index>(dim);
    map.r = Matrix::Identity(d, d);
    map.b = Vector::Zero(d);
    map.target_dim = dim;
    return map;
}

AffineMap fit_affine_lsq(const Matrix& source, const Matrix& target, const AffineOptions& options) {
    Prepared prep = prepare(source, target, options.with_bias, options.standardize);
    Eigen::CompleteOrthogonalDecomposition<ColMatrix> cod(prep.design);
    const ColMatrix weights = cod.solve(prep.target);
    AffineMap map = std::move(prep.shell);
    finish(map, weights, prep);
    return map;
}

AffineObjective::AffineObjective(const Matrix& source, const Matrix& target,
                                 const GradientDescentOptions& options) {
    const Prepared prep = prepare(source, target, options.with_bias, options.standardize);
    *this = from_design(prep.design, prep.target);
}

AffineObjective AffineObjective::from_design(const Eigen::MatrixXd& design,
                                             const Eigen::MatrixXd& target) {
    AffineObjective o;
    const double n = static_cast<double>(design.rows());
    o.ata_ = design.transpose() * design / n;
    o.aty_ = design.transpose() * target / n;
    o.yy_ = target.squaredNorm() / n;
    return o;
}

double AffineObjective::loss(const Eigen::MatrixXd& w) const {
    return 0.5 * ((w.transpose() * (ata_ * w)).trace() - 2.0 * (w.transpose() * aty_).trace() + yy_);
}

Eigen::MatrixXd AffineObjective::gradient(const Eigen::MatrixXd& w) const {
    return ata_ * w - aty_;
}

double AffineObjective::lipschitz() const {
    Eigen::SelfAdjointEigenSolver<ColMatrix> eig(ata_, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff();
}

double affine_gd_lipschitz(const Matrix& source, const Matrix& target,
                           const GradientDescentOptions& options) {
    return AffineObjective(source, target, options).lipschitz();
}

AffineMap fit_affine_gd(const Matrix& source, const Matrix& target,
                        const GradientDescentOptions& options, std::vector<double>* losses) {
    if (!(options.learning_rate >= 0.0) || !std::isfinite(options.learning_rate)) {
        fail(ErrorKind::InvalidArgument, "learning rate must be non-negative");
    }
    Prepared prep = prepare(source, target, options.with_bias, options.standardize);
    const AffineObjective objective = AffineObjective::from_design(prep.design, prep.target);

    ColMatrix weights = ColMatrix::Zero(prep.design.cols(), prep.target.cols());
    if (losses) {
        losses->clear();
        losses->reserve(options.iterations);
    }
    for (std::size_t it = 0; it < options.iterations; ++it) {
        weights -= options.learning_rate * objective.gradient(weights);
        const double loss = objective.loss(weights);
        if (!std::isfinite(loss) || !weights.allFinite()) {
            throw DivergenceError(it, "gradient descent diverged at iteration " +
                                          std::to_string(it) + "; lower the learning rate");
        }
        if (losses) {
            losses->push_back(loss);
        }
    }

    AffineMap map = std::move(prep.shell);
    finish(map, weights, prep);
    return map;
}

Matrix apply(const AffineMap& map, const Matrix& x) {
    const auto cols = static_cast<Index>(x.cols());
    if (cols != map.d_in() && (!map.padded_from || cols != *map.padded_from)) {
        fail(ErrorKind::InvalidShape, "affine map expects " +
                                          (map.padded_from ? std::to_string(*map.padded_from) + " or "
                                                           : std::string()) +
                                          std::to_string(map.d_in()) + " columns, got " +
                                          std::to_string(cols));
    }
    Matrix z = cols == map.d_in() ? x : zero_pad_columns(x, map.d_in());
    if (map.source_stats) {
        z = apply_standardization(z, map.source_stats->means, map.source_stats->stds);
    }
    Matrix out = z * map.r;
    out.rowwise() += map.b.transpose();
    if (map.target_stats) {
        out = undo_standardization(out, map.target_stats->means, map.target_stats->stds);
    }
    if (static_cast<Index>(out.cols()) != map.target_dim) {
        out = Matrix(out.leftCols(static_cast<Eigen::Index>(map.target_dim)));
    }
    return out;
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json stats_json(const std::optional<ColumnStats>& s) {
    if (!s) {
        return nullptr;
    }
    return {{"means", to_std(s->means)}, {"stds", to_std(s->stds)}};
}

std::optional<ColumnStats> stats_from(const nlohmann::json& j) {
    if (j.is_null()) {
        return std::nullopt;
    }
    return ColumnStats{from_std(j.at("means")), from_std(j.at("stds"))};
}

} // namespace

void save_affine(const std::filesystem::path& dir, const AffineMap& map) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        fail(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
    }
    save_matrix(dir / "r.npy", map.r);
    const nlohmann::json meta = {
        {"schema", 1},
        {"kind", "affine"},
        {"d_in", map.d_in()},
        {"d_out", map.d_out()},
        {"target_dim", map.target_dim},
        {"padded_from", map.padded_from ? nlohmann::json(*map.padded_from) : nlohmann::json()},
        {"b", to_std(map.b)},
        {"source_stats", stats_json(map.source_stats)},
        {"target_stats", stats_json(map.target_stats)},
        {"training_residual", map.training_residual},
        {"r", "r.npy"},
    };
    std::ofstream out(dir / "affine.json", std::ios::trunc);
    if (!out) {
        fail(ErrorKind::IoError, "cannot write " + (dir / "affine.json").string());
    }
    out << meta.dump(2) << '\n';
}

AffineMap load_affine(const std::filesystem::path& dir) {
    std::ifstream in(dir / "affine.json");
    if (!in) {
        fail(ErrorKind::IoError, "cannot open " + (dir / "affine.json").string());
    }
    AffineMap map;
    try {
        const auto meta = nlohmann::json::parse(in);
        if (meta.at("kind") != "affine") {
            fail(ErrorKind::FormatError, dir.string() + " is not an affine bundle");
        }
        map.r = load_matrix(dir / meta.at("r").get<std::string>());
        map.b = from_std(meta.at("b"));
        map.target_dim = meta.at("target_dim").get<Index>();
        if (!meta.at("padded_from").is_null()) {
            map.padded_from = meta.at("padded_from").get<Index>();
        }
        map.source_stats = stats_from(meta.at("source_stats"));
        map.target_stats = stats_from(meta.at("target_stats"));
        map.training_residual = meta.at("training_residual").get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::FormatError, (dir / "affine.json").string() + ": " + e.what());
    }
    if (map.b.size() != map.r.cols() || map.target_dim > map.d_out() ||
        (map.padded_from && *map.padded_from > map.d_in())) {
        fail(ErrorKind::FormatError, dir.string() + ": inconsistent affine bundle shapes");
    }
    return map;
}

} // namespace latent_align
