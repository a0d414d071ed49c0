#include "latent_align/pipeline.hpp"

#include "latent_align/error.hpp"
#include "latent_align/metrics.hpp"
#include "latent_align/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace latent_align {

Method parse_method(std::string_view name) {
    if (name == "affine") {
        return Method::Affine;
    }
    if (name == "local-cka") {
        return Method::LocalCka;
    }
    fail(ErrorKind::InvalidArgument, "unknown method '" + std::string(name) +
                                         "' (expected affine or local-cka)");
}

std::string_view method_name(Method m) noexcept {
    return m == Method::Affine ? "affine" : "local-cka";
}

Direction parse_direction(std::string_view name) {
    if (name == "text-to-3d") {
        return Direction::TextTo3d;
    }
    if (name == "3d-to-text") {
        return Direction::ThreeDToText;
    }
    fail(ErrorKind::InvalidArgument, "unknown direction '" + std::string(name) +
                                         "' (expected text-to-3d or 3d-to-text)");
}

std::string_view direction_name(Direction d) noexcept {
    return d == Direction::TextTo3d ? "text-to-3d" : "3d-to-text";
}

AffineSolver parse_solver(std::string_view name) {
    if (name == "lsq") {
        return AffineSolver::Lsq;
    }
    if (name == "gd") {
        return AffineSolver::GradientDescent;
    }
    fail(ErrorKind::InvalidArgument, "unknown solver '" + std::string(name) +
                                         "' (expected lsq or gd)");
}

std::string_view solver_name(AffineSolver s) noexcept {
    return s == AffineSolver::Lsq ? "lsq" : "gd";
}

Roles resolve_roles(const PairedDataset& ds, Direction direction) {
    const bool x_is_text = ds.x.modality == "text" || ds.y.modality == "3d";
    const Side text = x_is_text ? Side::X : Side::Y;
    const Side shape = x_is_text ? Side::Y : Side::X;
    return direction == Direction::TextTo3d ? Roles{text, shape} : Roles{shape, text};
}

namespace {

/// Anchor and query rows arranged by retrieval role.
struct SplitViews {
    Matrix anchor_source;
    Matrix anchor_target;
    Matrix query_source;
    Matrix query_target;
};

const Matrix& side_features(const PairedDataset& ds, Side side) {
    return side == Side::X ? ds.x.features : ds.y.features;
}

SplitViews make_views(const PairedDataset& ds, const Split& split, const Roles& roles) {
    const Matrix& src = side_features(ds, roles.source);
    const Matrix& tgt = side_features(ds, roles.target);
    return {select_rows(src, split.anchor_indices), select_rows(tgt, split.anchor_indices),
            select_rows(src, split.query_indices), select_rows(tgt, split.query_indices)};
}

CcaModel fit_views_cca(const SplitViews& v, const Roles& roles, Index k, const EvalConfig& cfg) {
    const bool src_is_x = roles.source == Side::X;
    const Matrix& xa = src_is_x ? v.anchor_source : v.anchor_target;
    const Matrix& ya = src_is_x ? v.anchor_target : v.anchor_source;
    return fit_cca(xa, ya, k, CcaOptions{cfg.ridge, cfg.cca_standardize});
}

SplitViews project_views(const SplitViews& v, const CcaModel& model, const Roles& roles) {
    return {project(model, v.anchor_source, roles.source),
            project(model, v.anchor_target, roles.target),
            project(model, v.query_source, roles.source),
            project(model, v.query_target, roles.target)};
}

Matrix similarity_from_views(const SplitViews& v, const EvalConfig& cfg, Index local_anchors) {
    if (v.query_source.rows() == 0) {
        fail(ErrorKind::InvalidSplit, "evaluation needs at least one query");
    }
    if (cfg.method == Method::Affine) {
        AffineMap map;
        if (cfg.solver == AffineSolver::Lsq) {
            map = fit_affine_lsq(v.anchor_source, v.anchor_target,
                                 AffineOptions{cfg.with_bias, cfg.affine_standardize});
        } else {
            GradientDescentOptions gd = cfg.gd;
            gd.with_bias = cfg.with_bias;
            gd.standardize = cfg.affine_standardize;
            map = fit_affine_gd(v.anchor_source, v.anchor_target, gd);
        }
        return pairwise_cosine(apply(map, v.query_source), v.query_target);
    }
    if (local_anchors > static_cast<Index>(v.anchor_source.rows())) {
        fail(ErrorKind::InvalidSplit, "local CKA wants " + std::to_string(local_anchors) +
                                          " anchors but the split has " +
                                          std::to_string(v.anchor_source.rows()));
    }
    const auto na = static_cast<Eigen::Index>(local_anchors);
    return local_cka_matrix(v.query_source, v.query_target, v.anchor_source.topRows(na),
                            v.anchor_target.topRows(na), cfg.kernel);
}

std::string method_label(Method m, bool projected) {
    return std::string(method_name(m)) + (projected ? "+cca" : "");
}

RetrievalReport labelled(RetrievalReport r, const Split& split, const EvalConfig& cfg,
                         std::optional<Index> k) {
    r.seed = split.seed;
    r.method = method_label(cfg.method, k.has_value());
    r.subspace_dim = k;
    return r;
}

double sample_std(std::span<const double> v, double mean) {
    if (v.size() < 2) {
        return 0.0;
    }
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Aggregate per-seed values[seed][point] into a curve.
AblationCurve aggregate(std::string parameter, std::string metric, std::vector<double> values,
                        const std::vector<std::vector<double>>& per_seed) {
    AblationCurve c;
    c.parameter = std::move(parameter);
    c.metric = std::move(metric);
    c.values = std::move(values);
    c.n_seeds = per_seed.size();
    for (std::size_t i = 0; i < c.values.size(); ++i) {
        std::vector<double> column;
        column.reserve(per_seed.size());
        double sum = 0.0;
        for (const auto& s : per_seed) {
            column.push_back(s[i]);
            sum += s[i];
        }
        const double mean = column.empty() ? 0.0 : sum / static_cast<double>(column.size());
        c.means.push_back(mean);
        c.stds.push_back(sample_std(column, mean));
    }
    return c;
}

std::vector<double> as_values(std::span<const Index> v) {
    return {v.begin(), v.end()};
}

} // namespace

Matrix build_similarity(const PairedDataset& ds, const Split& split, std::optional<Index> k,
                        const EvalConfig& cfg) {
    const Roles roles = resolve_roles(ds, cfg.direction);
    SplitViews v = make_views(ds, split, roles);
    if (k) {
        v = project_views(v, fit_views_cca(v, roles, *k, cfg), roles);
    }
    return similarity_from_views(v, cfg, cfg.local_cka_anchors);
}

RetrievalReport score_similarity(const Matrix& similarity, std::span<const Index> ks) {
    RetrievalReport r;
    r.matching_accuracy = matching_accuracy(similarity).accuracy;
    r.top_k = topk_retrieval(similarity, ks);
    r.n_query = static_cast<std::size_t>(similarity.rows());
    return r;
}

RetrievalReport evaluate_pipeline(const PairedDataset& ds, const Split& split,
                                  std::optional<Index> k, const EvalConfig& cfg) {
    return labelled(score_similarity(build_similarity(ds, split, k, cfg), cfg.ks), split, cfg, k);
}

RetrievalReport evaluate_affine_pipeline(const PairedDataset& ds, const Split& split,
                                         std::optional<Index> k, const EvalConfig& cfg) {
    EvalConfig c = cfg;
    c.method = Method::Affine;
    return evaluate_pipeline(ds, split, k, c);
}

RetrievalReport evaluate_local_cka_pipeline(const PairedDataset& ds, const Split& split,
                                            std::optional<Index> k, const EvalConfig& cfg) {
    EvalConfig c = cfg;
    c.method = Method::LocalCka;
    return evaluate_pipeline(ds, split, k, c);
}

std::vector<RetrievalReport> evaluate_seeds(const PairedDataset& ds, std::optional<Index> k,
                                            const EvalConfig& cfg) {
    std::vector<RetrievalReport> reports(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), [&](std::size_t s) {
        const Split split = make_split(ds.size(), cfg.n_anchor, cfg.n_query, cfg.seeds[s]);
        reports[s] = evaluate_pipeline(ds, split, k, cfg);
    });
    return reports;
}

std::vector<std::string> metric_names(std::span<const Index> ks) {
    std::vector<std::string> names{"matching_accuracy"};
    for (Index k : ks) {
        names.push_back("top_" + std::to_string(k));
    }
    return names;
}

double metric_value(const RetrievalReport& report, std::string_view metric) {
    if (metric == "matching_accuracy") {
        return report.matching_accuracy;
    }
    if (metric.starts_with("top_")) {
        const Index k = std::stoul(std::string(metric.substr(4)));
        if (auto it = report.top_k.find(k); it != report.top_k.end()) {
            return it->second;
        }
    }
    fail(ErrorKind::InvalidArgument, "report has no metric '" + std::string(metric) + "'");
}

std::vector<MetricSummary> summarize(std::span<const RetrievalReport> reports) {
    std::vector<MetricSummary> out;
    if (reports.empty()) {
        return out;
    }
    std::vector<Index> ks;
    for (const auto& [k, v] : reports.front().top_k) {
        ks.push_back(k);
    }
    for (const auto& name : metric_names(ks)) {
        std::vector<double> values;
        double sum = 0.0;
        for (const auto& r : reports) {
            values.push_back(metric_value(r, name));
            sum += values.back();
        }
        const double mean = sum / static_cast<double>(values.size());
        out.push_back({name, mean, sample_std(values, mean), values.size()});
    }
    return out;
}

Matrix cka_heatmap(std::span<const EmbeddingSet> sets, const KernelSpec& spec) {
    const auto n = static_cast<Eigen::Index>(sets.size());
    for (const auto& s : sets) {
        if (s.features.rows() != sets.front().features.rows()) {
            fail(ErrorKind::InvalidShape, "heatmap sets have different sample counts");
        }
    }
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            out(i, j) = cka(sets[static_cast<std::size_t>(i)].features,
                            sets[static_cast<std::size_t>(j)].features, spec);
            out(j, i) = out(i, j);
        }
    }
    return out;
}

Matrix cka_heatmap(std::span<const EmbeddingSet> sets, const KernelSpec& spec,
                   const HeatmapAlignment& alignment) {
    const auto n = static_cast<Eigen::Index>(sets.size());
    for (const auto& s : sets) {
        if (s.features.rows() != sets.front().features.rows()) {
            fail(ErrorKind::InvalidShape, "heatmap sets have different sample counts");
        }
    }
    std::vector<Matrix> fit;
    std::vector<Matrix> eval;
    for (const auto& s : sets) {
        fit.push_back(select_rows(s.features, alignment.fit_rows));
        eval.push_back(select_rows(s.features, alignment.eval_rows));
    }
    Matrix out(n, n);
    parallel_for(sets.size() * sets.size(), [&](std::size_t cell) {
        const std::size_t i = cell / sets.size();
        const std::size_t j = cell % sets.size();
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        if (i == j) {
            out(ii, jj) = cka(eval[i], eval[i], spec);
            return;
        }
        const AffineMap map = fit_affine_lsq(fit[i], fit[j], alignment.affine);
        out(ii, jj) = cka(apply(map, eval[i]), eval[j], spec);
    });
    return out;
}

std::vector<AblationCurve> ablate_dimension(const PairedDataset& ds, std::span<const Index> dims,
                                            const EvalConfig& cfg) {
    const auto names = metric_names(cfg.ks);
    const std::size_t n_seeds = cfg.seeds.size();
    // results[seed][metric][dim], baselines[seed][metric]
    std::vector<std::vector<std::vector<double>>> results(
        n_seeds, std::vector<std::vector<double>>(names.size()));
    std::vector<std::vector<double>> baselines(n_seeds);

    if (!dims.empty()) {
        const Index max_dim = *std::max_element(dims.begin(), dims.end());
        const Roles roles = resolve_roles(ds, cfg.direction);
        parallel_for(n_seeds, [&](std::size_t s) {
            const Split split = make_split(ds.size(), cfg.n_anchor, cfg.n_query, cfg.seeds[s]);
            const SplitViews raw = make_views(ds, split, roles);
            const RetrievalReport base =
                score_similarity(similarity_from_views(raw, cfg, cfg.local_cka_anchors), cfg.ks);
            for (const auto& name : names) {
                baselines[s].push_back(metric_value(base, name));
            }
            const CcaModel full = fit_views_cca(raw, roles, max_dim, cfg);
            for (Index d : dims) {
                const SplitViews v = project_views(raw, full.truncated(d), roles);
                const RetrievalReport r =
                    score_similarity(similarity_from_views(v, cfg, cfg.local_cka_anchors), cfg.ks);
                for (std::size_t m = 0; m < names.size(); ++m) {
                    results[s][m].push_back(metric_value(r, names[m]));
                }
            }
        });
    }

    std::vector<AblationCurve> curves;
    for (std::size_t m = 0; m < names.size(); ++m) {
        std::vector<std::vector<double>> proj(n_seeds);
        std::vector<std::vector<double>> base(n_seeds);
        for (std::size_t s = 0; s < n_seeds; ++s) {
            proj[s] = results[s][m];
            if (!dims.empty()) {
                base[s].assign(dims.size(), baselines[s][m]);
            }
        }
        curves.push_back(aggregate("dim", names[m], as_values(dims), proj));
        curves.push_back(aggregate("dim", "baseline_" + names[m], as_values(dims), base));
    }
    return curves;
}

std::vector<AblationCurve> ablate_anchors(const PairedDataset& ds,
                                          std::span<const Index> anchor_counts,
                                          std::span<const Index> dims, const EvalConfig& cfg) {
    const auto names = metric_names(cfg.ks);
    const std::size_t n_seeds = cfg.seeds.size();
    const std::size_t n_counts = anchor_counts.size();
    if (n_counts == 0 || dims.empty()) {
        return {};
    }
    const Index max_count = *std::max_element(anchor_counts.begin(), anchor_counts.end());
    if (max_count > ds.size() || cfg.n_query > ds.size() - max_count) {
        fail(ErrorKind::InvalidSplit, "anchor count " + std::to_string(max_count) + " plus " +
                                          std::to_string(cfg.n_query) + " queries exceeds " +
                                          std::to_string(ds.size()) + " samples");
    }
    const Index max_dim = *std::max_element(dims.begin(), dims.end());
    const Roles roles = resolve_roles(ds, cfg.direction);

    // values[seed][dim][metric][count]
    std::vector<std::vector<std::vector<std::vector<double>>>> values(
        n_seeds, std::vector<std::vector<std::vector<double>>>(
                     dims.size(), std::vector<std::vector<double>>(
                                      names.size(), std::vector<double>(n_counts))));
    parallel_for(n_seeds * n_counts, [&](std::size_t job) {
        const std::size_t s = job / n_counts;
        const std::size_t c = job % n_counts;
        const Split full = make_split(ds.size(), max_count, cfg.n_query, cfg.seeds[s]);
        Split split = full;
        split.anchor_indices.resize(anchor_counts[c]);
        const SplitViews raw = make_views(ds, split, roles);
        const Index local_anchors = std::min(cfg.local_cka_anchors, anchor_counts[c]);

        std::optional<CcaModel> model;
        if (max_dim > 0) {
            model = fit_views_cca(raw, roles, max_dim, cfg);
        }
        for (std::size_t d = 0; d < dims.size(); ++d) {
            const SplitViews v =
                dims[d] == 0 ? raw : project_views(raw, model->truncated(dims[d]), roles);
            const RetrievalReport r =
                score_similarity(similarity_from_views(v, cfg, local_anchors), cfg.ks);
            for (std::size_t m = 0; m < names.size(); ++m) {
                values[s][d][m][c] = metric_value(r, names[m]);
            }
        }
    });

    std::vector<AblationCurve> curves;
    for (std::size_t d = 0; d < dims.size(); ++d) {
        const std::string suffix =
            "@dim=" + (dims[d] == 0 ? std::string("none") : std::to_string(dims[d]));
        for (std::size_t m = 0; m < names.size(); ++m) {
            std::vector<std::vector<double>> per_seed(n_seeds);
            for (std::size_t s = 0; s < n_seeds; ++s) {
                per_seed[s] = values[s][d][m];
            }
            curves.push_back(aggregate("anchors", names[m] + suffix, as_values(anchor_counts),
                                       per_seed));
        }
    }
    return curves;
}

} // namespace latent_align
