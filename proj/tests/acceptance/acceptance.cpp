// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "latent_align/affine.hpp"
#include "latent_align/cca.hpp"
#include "latent_align/dataset.hpp"
#include "latent_align/kernels.hpp"
#include "latent_align/metrics.hpp"
#include "latent_align/pipeline.hpp"
#include "latent_align/report.hpp"
#include "latent_align/synth.hpp"

#include "oracles.hpp"
#include "tempdir.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace latent_align;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

Outcome hsic_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1001);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const Eigen::Index n = 2 + t % 49;
        const Matrix fk = oracle::random_matrix(n, 1 + t % 7, rng);
        const Matrix fl = oracle::random_matrix(n, 1 + t % 5, rng);
        const Matrix k = gram(fk, t % 2 == 0 ? KernelSpec::linear() : KernelSpec::rbf(0.5));
        const Matrix l = gram(fl, t % 3 == 0 ? KernelSpec::rbf(0.2) : KernelSpec::linear());
        const double want = oracle::hsic(k, l);
        worst = std::max(worst, std::abs(hsic(k, l) - want) / std::max(1.0, std::abs(want)));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-10 && secs < 5.0,
            "max rel err " + fmt(worst) + " over 200 pairs, " + fmt(secs, 3) + " s"};
}

Outcome cka_invariants() {
    std::mt19937_64 rng(1002);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Eigen::Index n = 5 + t % 60;
        const Eigen::Index p = 1 + t % 12;
        const Matrix x = oracle::random_matrix(n, p, rng);
        const Matrix y = oracle::random_matrix(n, 1 + t % 8, rng);
        const Matrix q = oracle::random_orthogonal(p, rng);
        std::uniform_real_distribution<double> scale(0.01, 100.0);
        const double base = cka(x, y);
        worst = std::max({worst, std::abs(cka(x, x) - 1.0), std::abs(cka(x * q, y) - base),
                          std::abs(cka(scale(rng) * x, y) - base),
                          std::abs(cka(x, scale(rng) * y) - base)});
    }
    return {worst <= 1e-9, "max deviation " + fmt(worst) + " over 100 trials"};
}

Outcome cca_oracle() {
    std::mt19937_64 rng(1003);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index p = 1 + t % 20;
        const Eigen::Index q = 1 + (t * 7) % 20;
        const Eigen::Index n = 40 + (t * 53) % 460;
        const Eigen::Index k = std::min(p, q);
        const Matrix z = oracle::random_matrix(n, k, rng);
        const Matrix x = z * oracle::random_matrix(k, p, rng) + oracle::random_matrix(n, p, rng);
        const Matrix y = z * oracle::random_matrix(k, q, rng) + oracle::random_matrix(n, q, rng);
        const CcaModel m = fit_cca(x, y, static_cast<Index>(k), CcaOptions{0.0, false});
        const Eigen::VectorXd want = oracle::cca_correlations(x, y);
        worst = std::max(worst, (m.correlations - want.head(k)).cwiseAbs().maxCoeff());
    }
    return {worst <= 1e-6, "max abs err " + fmt(worst) + " over 50 instances"};
}

Outcome affine_recovery() {
    std::mt19937_64 rng(1004);
    double lsq_err = 0.0;
    for (int t = 0; t < 10; ++t) {
        const Eigen::Index d = 2 + t * 3;
        const Matrix x = oracle::random_matrix(300, d, rng);
        Matrix y = x * oracle::random_matrix(d, d, rng);
        y.rowwise() += oracle::random_matrix(1, d, rng).row(0);
        const AffineMap map = fit_affine_lsq(x, y);
        lsq_err = std::max(lsq_err, (apply(map, x) - y).cwiseAbs().maxCoeff());
    }
    double gd_err = 0.0;
    for (Eigen::Index d = 1; d <= 5; ++d) {
        const Matrix x = oracle::random_matrix(200, d, rng);
        Matrix y = x * oracle::random_matrix(d, d, rng) + 0.1 * oracle::random_matrix(200, d, rng);
        y.rowwise() += oracle::random_matrix(1, d, rng).row(0);
        GradientDescentOptions opts;
        opts.iterations = 10000;
        opts.learning_rate = 1.0 / affine_gd_lipschitz(x, y, opts);
        const AffineMap gd = fit_affine_gd(x, y, opts);
        const AffineMap ls = fit_affine_lsq(x, y);
        gd_err = std::max({gd_err, (gd.r - ls.r).cwiseAbs().maxCoeff(),
                           (gd.b - ls.b).cwiseAbs().maxCoeff()});
    }
    return {lsq_err <= 1e-8 && gd_err <= 1e-3,
            "closed-form max err " + fmt(lsq_err) + ", gd vs closed form " + fmt(gd_err)};
}

Outcome assignment_oracle() {
    std::mt19937_64 rng(1005);
    std::uniform_int_distribution<int> cost(0, 99);
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        Matrix c(5, 5);
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            c.data()[i] = t % 2 == 0 ? static_cast<double>(cost(rng))
                                     : oracle::random_matrix(1, 1, rng)(0, 0);
        }
        const auto r = hungarian(c);
        double s = 0.0;
        for (Eigen::Index i = 0; i < 5; ++i) {
            s += c(i, static_cast<Eigen::Index>(r.permutation[static_cast<std::size_t>(i)]));
        }
        if (s != oracle::brute_force_assignment(c)) {
            ++mismatches;
        }
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches in 1000 matrices"};
}

// Criteria 6 and 7 share one synthetic family.
constexpr Index kN = 5500;
constexpr Index kDim = 512;
constexpr Index kShared = 20;
constexpr double kNoise = 3.0;

EvalConfig family_config() {
    EvalConfig cfg;
    cfg.n_anchor = 5000;
    cfg.n_query = 500;
    cfg.ks = {1, 5, 10};
    cfg.seeds = {0, 1, 2};
    return cfg;
}

Outcome subspace_reproduction(const PairedDataset& ds) {
    const auto t0 = Clock::now();
    const EvalConfig cfg = family_config();
    const std::vector<Index> dims{5, 10, 20, 50, 100};
    const auto curves = ablate_dimension(ds, dims, cfg);
    const AblationCurve* proj = nullptr;
    const AblationCurve* base = nullptr;
    for (const auto& c : curves) {
        if (c.metric == "top_5") {
            proj = &c;
        } else if (c.metric == "baseline_top_5") {
            base = &c;
        }
    }
    if (proj == nullptr || base == nullptr) {
        return {false, "top_5 curves missing"};
    }
    double gain = 0.0;
    for (std::uint64_t seed : cfg.seeds) {
        const Split split = make_split(ds.size(), cfg.n_anchor, cfg.n_query, seed);
        const auto with = evaluate_affine_pipeline(ds, split, kShared, cfg);
        const auto without = evaluate_affine_pipeline(ds, split, std::nullopt, cfg);
        gain += (with.top_k.at(5) - without.top_k.at(5)) / static_cast<double>(cfg.seeds.size());
    }
    const auto best = static_cast<std::size_t>(
        std::max_element(proj->means.begin(), proj->means.end()) - proj->means.begin());
    const std::size_t at20 = 2;
    const bool near = best + 1 >= at20 && best <= at20 + 1;
    const double secs = seconds_since(t0);
    std::string curve;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        curve += (i ? " " : "") + std::to_string(dims[i]) + ":" + fmt(proj->means[i], 3);
    }
    return {gain >= 0.10 && near && secs < 120.0,
            "top-5 gain " + fmt(100.0 * gain, 3) + " pts (baseline " + fmt(base->means[0], 3) +
                "), curve {" + curve + "}, argmax dim " + std::to_string(dims[best]) + ", " +
                fmt(secs, 3) + " s"};
}

Outcome anchor_reproduction(const PairedDataset& ds) {
    EvalConfig cfg = family_config();
    const std::vector<Index> counts{200, 500, 1000, 2000, 3000, 4000, 5000};
    const std::vector<Index> dims{kShared};
    const auto curves = ablate_anchors(ds, counts, dims, cfg);
    const std::string name = "top_5@dim=" + std::to_string(kShared);
    for (const auto& c : curves) {
        if (c.metric != name) {
            continue;
        }
        const double at200 = c.means[0];
        const double at2000 = c.means[3];
        const double tail = std::abs(c.means[c.means.size() - 1] - c.means[c.means.size() - 2]);
        std::string curve;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            curve += (i ? " " : "") + std::to_string(counts[i]) + ":" + fmt(c.means[i], 3);
        }
        return {at2000 >= at200 - 0.02 && tail < 0.03,
                "curve {" + curve + "}, last step " + fmt(tail, 3)};
    }
    return {false, name + " curve missing"};
}

Outcome direction_check() {
    int both = 0;
    std::string detail;
    for (std::uint64_t seed : {0, 1, 2}) {
        std::mt19937_64 rng(2000 + seed);
        const Eigen::Index n = 600;
        Matrix x = oracle::random_matrix(n, 32, rng);
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            x.col(c) *= 1.0 / (1.0 + c); // anisotropic so the map changes the geometry
        }
        Matrix y = x * oracle::random_matrix(32, 24, rng) + 0.05 * oracle::random_matrix(n, 24, rng);
        y.rowwise() += oracle::random_matrix(1, 24, rng).row(0);
        std::vector<EmbeddingSet> sets(2);
        sets[0].features = x;
        sets[1].features = y;
        const Split split = make_split(static_cast<Index>(n), 300, 300, seed);
        HeatmapAlignment align;
        align.fit_rows = split.anchor_indices;
        align.eval_rows = split.query_indices;
        const double before = cka(select_rows(x, align.eval_rows), select_rows(y, align.eval_rows));
        const Matrix after = cka_heatmap(sets, KernelSpec::linear(), align);
        if (after(0, 1) > before && after(1, 0) > before) {
            ++both;
        }
        detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) +
                  ": " + fmt(before, 3) + " -> " + fmt(after(0, 1), 3) + " / " + fmt(after(1, 0), 3);
    }
    return {both == 3, detail};
}

Outcome chamfer_analog() {
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed : {0, 1, 2}) {
        const SynthData sd = synth_generate_with_latents({2300, 128, 128, 10, 1.0, 300 + seed});
        const Split split = make_split(sd.data.size(), 2000, 300, seed);
        const Matrix text = sd.data.y.features;
        const CcaModel model =
            fit_cca(select_rows(sd.data.x.features, split.anchor_indices),
                    select_rows(text, split.anchor_indices), 10);
        const auto shapes = synth_shapes(sd.latents, split.query_indices, 64);
        const auto pairs = pairwise_chamfer(shapes);
        const Matrix feats = select_rows(text, split.query_indices);
        const double full = latent_distance_correlation(pairs, feats);
        const double projected = latent_distance_correlation(pairs, project(model, feats, Side::Y));
        wins += projected > full ? 1 : 0;
        detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) +
                  ": full " + fmt(full, 3) + ", projected " + fmt(projected, 3);
    }
    return {wins >= 2, detail};
}

int shell(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

bool schema_valid(const json& j) {
    if (!j.is_object() || j.value("schema", 0) != 1 || j.value("command", "") != "eval" ||
        !j.contains("config") || !j.contains("dataset") || !j.contains("summary") ||
        !j["results"].is_array() || j["results"].empty()) {
        return false;
    }
    for (const auto& r : j["results"]) {
        if (!r.contains("matching_accuracy") || !r.contains("top_k") || !r.contains("seed") ||
            !r.contains("method") || !r.contains("n_query")) {
            return false;
        }
        const double acc = r["matching_accuracy"].get<double>();
        if (acc < 0.0 || acc > 1.0) {
            return false;
        }
    }
    return true;
}

Outcome cli_end_to_end() {
    TempDir dir;
    const std::string bin = ALIGN_CLI_PATH;
    const std::string data = (dir / "data").string();
    const std::string quiet = " 2>>" + (dir / "stderr.txt").string();
    if (shell(bin + " gen-synth --n 2000 --p 64 --q 48 --k 8 --seed 11 --out " + data + quiet) != 0) {
        return {false, "gen-synth failed"};
    }
    std::string detail;
    bool ok = true;
    for (const std::string method : {"affine", "local-cka"}) {
        const std::string first = (dir / (method + ".json")).string();
        const std::string second = (dir / (method + "_replay.json")).string();
        const int rc1 = shell(bin + " eval --manifest " + data + "/manifest.json --method " + method +
                              " --anchors 1500 --lcka-anchors 300 --queries 200 --dim 8 --out " +
                              first + quiet);
        const int rc2 = shell(bin + " eval --config " + first + " --out " + second + quiet);
        bool valid = false;
        try {
            valid = rc1 == 0 && schema_valid(load_report_json(first));
        } catch (const std::exception&) {
            valid = false;
        }
        const bool same = rc2 == 0 && slurp(first) == slurp(second);
        ok = ok && rc1 == 0 && valid && same;
        detail += (detail.empty() ? "" : "; ") + method + ": exit " + std::to_string(rc1) +
                  (valid ? ", schema ok" : ", schema invalid") +
                  (same ? ", replay identical" : ", replay differs");
    }
    return {ok, detail};
}

} // namespace

int main() {
    std::cout << "generating synthetic family n=" << kN << " p=q=" << kDim << " k=" << kShared
              << " noise=" << kNoise << std::endl;
    const PairedDataset family = synth_generate(kN, kDim, kDim, kShared, kNoise, 42);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"HSIC oracle", hsic_oracle},
        {"CKA invariants", cka_invariants},
        {"CCA oracle", cca_oracle},
        {"affine recovery", affine_recovery},
        {"assignment oracle", assignment_oracle},
        {"subspace projection beats baseline", [&] { return subspace_reproduction(family); }},
        {"anchor count plateau", [&] { return anchor_reproduction(family); }},
        {"alignment raises CKA both ways", direction_check},
        {"projected space tracks geometry", chamfer_analog},
        {"CLI end to end", cli_end_to_end},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << "criterion " << (i + 1) << ": " << (o.pass ? "PASS" : "FAIL") << " "
                  << criteria[i].first << " (" << o.detail << ")" << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
