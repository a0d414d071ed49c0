#include "latent_align/cca.hpp"

#include "latent_align/error.hpp"
#include "latent_align/npy.hpp"

#include "json.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace latent_align {

namespace {

using ColMatrix = Eigen::MatrixXd;

/// Symmetric inverse square root of a (regularized) covariance block.
ColMatrix inverse_sqrt(const ColMatrix& cov, double ridge, std::string_view which) {
    ColMatrix reg = cov;
    if (ridge > 0.0) {
        const double scale = cov.diagonal().mean();
        reg.diagonal().array() += ridge * scale;
    }
    Eigen::SelfAdjointEigenSolver<ColMatrix> eig(reg);
    if (eig.info() != Eigen::Success) {
        fail(ErrorKind::SingularCovariance, std::string(which) + " covariance eigensolver failed");
    }
    const Vector& values = eig.eigenvalues(); // ascending
    const double largest = values[values.size() - 1];
    if (!(largest > 0.0) || values[0] <= 1e-12 * largest) {
        fail(ErrorKind::SingularCovariance,
             std::string(which) + " covariance is rank deficient (smallest eigenvalue " +
                 std::to_string(values[0]) + "); refit with a positive ridge");
    }
    const Vector inv = values.array().rsqrt();
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

} // namespace

CcaModel CcaModel::truncated(Index k) const {
    if (k < 1 || k > dim()) {
        fail(ErrorKind::InvalidRank, "cannot truncate a rank-" + std::to_string(dim()) +
                                         " model to " + std::to_string(k));
    }
    const auto kk = static_cast<Eigen::Index>(k);
    CcaModel out = *this;
    out.w_x = w_x.leftCols(kk);
    out.w_y = w_y.leftCols(kk);
    out.correlations = correlations.head(kk);
    if (anchor_variates_x.size() != 0) {
        out.anchor_variates_x = anchor_variates_x.leftCols(kk);
        out.anchor_variates_y = anchor_variates_y.leftCols(kk);
    }
    return out;
}

CcaModel fit_cca(const Matrix& x_anchor, const Matrix& y_anchor, Index k,
                 const CcaOptions& options) {
    if (x_anchor.rows() != y_anchor.rows()) {
        fail(ErrorKind::InvalidShape, "anchor sets differ in size: " +
                                          std::to_string(x_anchor.rows()) + " vs " +
                                          std::to_string(y_anchor.rows()));
    }
    if (!(options.ridge >= 0.0) || !std::isfinite(options.ridge)) {
        fail(ErrorKind::InvalidArgument, "ridge must be non-negative");
    }
    const auto n = static_cast<Index>(x_anchor.rows());
    const auto p = static_cast<Index>(x_anchor.cols());
    const auto q = static_cast<Index>(y_anchor.cols());
    const Index max_rank = n == 0 ? 0 : std::min({p, q, n - 1});
    if (k < 1 || k > max_rank) {
        fail(ErrorKind::InvalidRank, "subspace dimension " + std::to_string(k) +
                                         " outside [1, " + std::to_string(max_rank) +
                                         "] (min of p, q, n_anchors - 1)");
    }

    CcaModel model;
    model.ridge = options.ridge;
    model.standardized = options.standardize;
    ColMatrix xc;
    ColMatrix yc;
    Vector scale_x = Vector::Ones(static_cast<Eigen::Index>(p));
    Vector scale_y = Vector::Ones(static_cast<Eigen::Index>(q));
    if (options.standardize) {
        Standardized sx = standardize_columns(x_anchor);
        Standardized sy = standardize_columns(y_anchor);
        xc = sx.data;
        yc = sy.data;
        model.mean_x = sx.means;
        model.mean_y = sy.means;
        scale_x = sx.stds.cwiseInverse();
        scale_y = sy.stds.cwiseInverse();
    } else {
        Centered cx = center_columns(x_anchor);
        Centered cy = center_columns(y_anchor);
        xc = cx.data;
        yc = cy.data;
        model.mean_x = cx.means;
        model.mean_y = cy.means;
    }

    const double denom = static_cast<double>(n - 1);
    const ColMatrix sxx = (xc.transpose() * xc) / denom;
    const ColMatrix syy = (yc.transpose() * yc) / denom;
    const ColMatrix sxy = (xc.transpose() * yc) / denom;

    const ColMatrix wx_white = inverse_sqrt(sxx, options.ridge, "x");
    const ColMatrix wy_white = inverse_sqrt(syy, options.ridge, "y");
    const ColMatrix t = wx_white * sxy * wy_white;

    Eigen::BDCSVD<ColMatrix> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto kk = static_cast<Eigen::Index>(k);
    ColMatrix u = svd.matrixU().leftCols(kk);
    ColMatrix v = svd.matrixV().leftCols(kk);
    model.correlations = svd.singularValues().head(kk);

    ColMatrix wx = wx_white * u;
    ColMatrix wy = wy_white * v;
    for (Eigen::Index c = 0; c < kk; ++c) {
        const double biggest = wx.col(c).cwiseAbs().maxCoeff();
        for (Eigen::Index r = 0; r < wx.rows(); ++r) {
            if (std::abs(wx(r, c)) > 1e-10 * biggest) {
                if (wx(r, c) < 0.0) {
                    wx.col(c) *= -1.0;
                    wy.col(c) *= -1.0;
                    u.col(c) *= -1.0;
                    v.col(c) *= -1.0;
                }
                break;
            }
        }
    }

    model.anchor_variates_x = (xc * wx_white) * u;
    model.anchor_variates_y = (yc * wy_white) * v;
    model.w_x = scale_x.asDiagonal() * wx;
    model.w_y = scale_y.asDiagonal() * wy;
    return model;
}

Matrix project(const CcaModel& model, const Matrix& m, Side side) {
    const Matrix& w = side == Side::X ? model.w_x : model.w_y;
    const Vector& mean = side == Side::X ? model.mean_x : model.mean_y;
    if (m.cols() != w.rows()) {
        fail(ErrorKind::InvalidShape, std::string("projection on side ") +
                                          (side == Side::X ? "x" : "y") + " expects " +
                                          std::to_string(w.rows()) + " columns, got " +
                                          std::to_string(m.cols()));
    }
    Matrix centered = m;
    centered.rowwise() -= mean.transpose();
    return centered * w;
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

void save_cca(const std::filesystem::path& dir, const CcaModel& model) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        fail(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
    }
    save_matrix(dir / "w_x.npy", model.w_x);
    save_matrix(dir / "w_y.npy", model.w_y);
    const nlohmann::json meta = {
        {"schema", 1},
        {"kind", "cca"},
        {"k", model.dim()},
        {"p", model.w_x.rows()},
        {"q", model.w_y.rows()},
        {"ridge", model.ridge},
        {"standardized", model.standardized},
        {"mean_x", to_std(model.mean_x)},
        {"mean_y", to_std(model.mean_y)},
        {"correlations", to_std(model.correlations)},
        {"w_x", "w_x.npy"},
        {"w_y", "w_y.npy"},
    };
    std::ofstream out(dir / "cca.json", std::ios::trunc);
    if (!out) {
        fail(ErrorKind::IoError, "cannot write " + (dir / "cca.json").string());
    }
    out << meta.dump(2) << '\n';
}

CcaModel load_cca(const std::filesystem::path& dir) {
    std::ifstream in(dir / "cca.json");
    if (!in) {
        fail(ErrorKind::IoError, "cannot open " + (dir / "cca.json").string());
    }
    CcaModel model;
    try {
        const auto meta = nlohmann::json::parse(in);
        if (meta.at("kind") != "cca") {
            fail(ErrorKind::FormatError, dir.string() + " is not a CCA bundle");
        }
        model.ridge = meta.at("ridge").get<double>();
        model.standardized = meta.at("standardized").get<bool>();
        model.mean_x = from_std(meta.at("mean_x").get<std::vector<double>>());
        model.mean_y = from_std(meta.at("mean_y").get<std::vector<double>>());
        model.correlations = from_std(meta.at("correlations").get<std::vector<double>>());
        model.w_x = load_matrix(dir / meta.at("w_x").get<std::string>());
        model.w_y = load_matrix(dir / meta.at("w_y").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::FormatError, (dir / "cca.json").string() + ": " + e.what());
    }
    if (model.w_x.rows() != model.mean_x.size() || model.w_y.rows() != model.mean_y.size() ||
        model.w_x.cols() != model.w_y.cols() || model.w_x.cols() != model.correlations.size()) {
        fail(ErrorKind::FormatError, dir.string() + ": inconsistent CCA bundle shapes");
    }
    return model;
}

} // namespace latent_align
