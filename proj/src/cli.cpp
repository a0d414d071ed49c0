#include "latent_align/cli.hpp"

#include "latent_align/affine.hpp"
#include "latent_align/cca.hpp"
#include "latent_align/dataset.hpp"
#include "latent_align/error.hpp"
#include "latent_align/kernels.hpp"
#include "latent_align/metrics.hpp"
#include "latent_align/npy.hpp"
#include "latent_align/pipeline.hpp"
#include "latent_align/random.hpp"
#include "latent_align/report.hpp"
#include "latent_align/synth.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <new>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace latent_align::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr int kSchema = 1;

std::vector<std::string> split_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur.push_back(c);
        }
    }
    if (!cur.empty() || !out.empty()) {
        out.push_back(cur);
    }
    return out;
}

std::optional<std::uint64_t> as_unsigned(const std::string& t) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
        return std::nullopt;
    }
    return v;
}

std::optional<double> as_double(const std::string& t) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
        return std::nullopt;
    }
    return v;
}

json token_json(const std::string& t) {
    if (auto u = as_unsigned(t)) {
        return *u;
    }
    if (auto d = as_double(t)) {
        return *d;
    }
    return t;
}

/// Config values back to command-line text.
std::string json_arg(const json& v, const std::string& key) {
    switch (v.type()) {
    case json::value_t::string:
        return v.get<std::string>();
    case json::value_t::boolean:
        return v.get<bool>() ? "true" : "false";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float:
        return v.dump();
    case json::value_t::array: {
        std::string s;
        for (const auto& e : v) {
            if (!s.empty()) {
                s += ',';
            }
            s += json_arg(e, key);
        }
        return s;
    }
    default:
        fail(ErrorKind::InvalidArgument, "config key '" + key + "' has an unsupported value");
    }
}

/// Registers options and remembers how to write each one into the resolved
/// config. Output locations are registered separately and stay out of it.
class Flags {
public:
    explicit Flags(CLI::App* app) : app_(app) {}

    template <class T>
    CLI::Option* add(const std::string& name, T& var, const std::string& help) {
        entries_.push_back({name, [&var] { return json(var); }});
        return app_->add_option("--" + name, var, help)->capture_default_str();
    }

    /// Comma-separated list kept as text, recorded as a JSON array.
    CLI::Option* add_list(const std::string& name, std::string& var, const std::string& help) {
        entries_.push_back({name, [&var] {
                                json a = json::array();
                                for (const auto& t : split_tokens(var)) {
                                    a.push_back(token_json(t));
                                }
                                return a;
                            }});
        return app_->add_option("--" + name, var, help)->capture_default_str();
    }

    /// Single token that may be a number or a keyword ("none", "median").
    CLI::Option* add_token(const std::string& name, std::string& var, const std::string& help) {
        entries_.push_back({name, [&var] { return token_json(var); }});
        return app_->add_option("--" + name, var, help)->capture_default_str();
    }

    CLI::Option* add_output(const std::string& name, std::string& var, const std::string& help) {
        return app_->add_option("--" + name, var, help);
    }

    json resolved() const {
        json j = json::object();
        for (const auto& e : entries_) {
            j[e.name] = e.value();
        }
        return j;
    }

    /// Fill options not given on the command line from a config object.
    void apply(const json& config) {
        if (!config.is_object()) {
            fail(ErrorKind::FormatError, "config must be a JSON object");
        }
        for (const auto& [key, value] : config.items()) {
            const bool known = std::any_of(entries_.begin(), entries_.end(),
                                           [&](const Entry& e) { return e.name == key; });
            if (!known) {
                fail(ErrorKind::InvalidArgument, "unknown config key '" + key + "' for " +
                                                     app_->get_name());
            }
            CLI::Option* opt = app_->get_option("--" + key);
            if (opt->count() > 0) {
                continue;
            }
            opt->clear();
            opt->add_result(json_arg(value, key));
            opt->run_callback();
        }
    }

private:
    struct Entry {
        std::string name;
        std::function<json()> value;
    };
    CLI::App* app_;
    std::vector<Entry> entries_;
};

void require(const std::string& value, const std::string& flag) {
    if (value.empty()) {
        fail(ErrorKind::InvalidArgument, flag + " is required");
    }
}

std::vector<Index> parse_counts(const std::string& s, const std::string& flag, bool allow_none) {
    std::vector<Index> out;
    for (const auto& t : split_tokens(s)) {
        if (allow_none && t == "none") {
            out.push_back(0);
            continue;
        }
        const auto v = as_unsigned(t);
        if (!v || *v == 0) {
            fail(ErrorKind::InvalidArgument, flag + ": '" + t + "' is not a positive count");
        }
        out.push_back(static_cast<Index>(*v));
    }
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    for (const auto& t : split_tokens(s)) {
        const auto v = as_unsigned(t);
        if (!v) {
            fail(ErrorKind::InvalidArgument, "--seeds: '" + t + "' is not a seed");
        }
        out.push_back(*v);
    }
    if (out.empty()) {
        fail(ErrorKind::InvalidArgument, "--seeds must not be empty");
    }
    return out;
}

std::optional<Index> parse_dim(const std::string& s) {
    if (s == "none") {
        return std::nullopt;
    }
    const auto v = as_unsigned(s);
    if (!v) {
        fail(ErrorKind::InvalidArgument, "--dim: '" + s + "' is not a count or 'none'");
    }
    return static_cast<Index>(*v);
}

KernelSpec parse_kernel(const std::string& kind, const std::string& gamma) {
    KernelSpec spec{parse_kernel_kind(kind), std::nullopt};
    if (gamma != "median") {
        const auto g = as_double(gamma);
        if (!g) {
            fail(ErrorKind::InvalidArgument, "--gamma: '" + gamma + "' is not a number or 'median'");
        }
        spec.gamma = *g;
    }
    spec.validate();
    return spec;
}

Side parse_side(const std::string& s) {
    if (s == "x") {
        return Side::X;
    }
    if (s == "y") {
        return Side::Y;
    }
    fail(ErrorKind::InvalidArgument, "side must be x or y, got '" + s + "'");
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_json(const Vector& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

void emit(const json& report, const std::string& out_path, const std::string& format,
          std::ostream& out) {
    const ReportFormat f = parse_report_format(format);
    if (out_path.empty()) {
        if (f == ReportFormat::Csv) {
            fail(ErrorKind::InvalidArgument, "--format csv needs --out");
        }
        out << report.dump(2) << '\n';
        return;
    }
    save_report(report, out_path, f);
}

json header(const std::string& command, const Flags& flags) {
    return {{"schema", kSchema}, {"command", command}, {"config", flags.resolved()}};
}

json dataset_json(const PairingResult& p) {
    return {{"n_paired", p.data.size()},
            {"dropped_x", p.dropped_x},
            {"dropped_y", p.dropped_y},
            {"dim_x", p.data.x.dim()},
            {"dim_y", p.data.y.dim()}};
}

/// Options shared by eval and the ablations.
struct EvalFlags {
    std::string manifest;
    std::string method = "affine";
    std::string direction = "text-to-3d";
    std::string kernel = "linear";
    std::string gamma = "median";
    double ridge = 1e-6;
    bool cca_standardize = false;
    bool affine_standardize = true;
    bool bias = true;
    std::string solver = "lsq";
    double lr = 1e-2;
    std::size_t iters = 10000;
    std::size_t anchors = 30000;
    std::size_t lcka_anchors = 1000;
    std::size_t queries = 500;
    std::string ks = "1,5,10";
    std::string seeds = "0,1,2";

    void add(Flags& f) {
        f.add("manifest", manifest, "Paired dataset manifest (JSON)");
        f.add("method", method, "affine | local-cka");
        f.add("direction", direction, "text-to-3d | 3d-to-text");
        f.add("kernel", kernel, "Local CKA kernel: linear | rbf");
        f.add_token("gamma", gamma, "RBF gamma, or 'median' for the median heuristic");
        f.add("ridge", ridge, "Relative CCA ridge");
        f.add("cca-standardize", cca_standardize, "Scale columns to unit variance before CCA");
        f.add("affine-standardize", affine_standardize, "Standardize both sides before the affine fit");
        f.add("bias", bias, "Fit a bias term");
        f.add("solver", solver, "Affine solver: lsq | gd");
        f.add("lr", lr, "Gradient descent learning rate");
        f.add("iters", iters, "Gradient descent iterations");
        f.add("anchors", anchors, "Anchor pairs for CCA and the affine fit");
        f.add("lcka-anchors", lcka_anchors, "Leading anchors used by local CKA");
        f.add("queries", queries, "Query pairs");
        f.add_list("ks", ks, "Top-k cut-offs");
        f.add_list("seeds", seeds, "Split seeds");
    }

    EvalConfig config() const {
        require(manifest, "--manifest");
        EvalConfig c;
        c.method = parse_method(method);
        c.direction = parse_direction(direction);
        c.kernel = parse_kernel(kernel, gamma);
        c.ridge = ridge;
        c.cca_standardize = cca_standardize;
        c.affine_standardize = affine_standardize;
        c.with_bias = bias;
        c.solver = parse_solver(solver);
        c.gd.learning_rate = lr;
        c.gd.iterations = iters;
        c.n_anchor = anchors;
        c.local_cka_anchors = lcka_anchors;
        c.n_query = queries;
        if (queries == 0) {
            fail(ErrorKind::InvalidArgument, "--queries must be positive");
        }
        c.ks = parse_counts(ks, "--ks", false);
        c.seeds = parse_seeds(seeds);
        return c;
    }
};

json summary_json(std::span<const RetrievalReport> reports) {
    json s = json::object();
    for (const auto& m : summarize(reports)) {
        s[m.metric] = {{"mean", m.mean}, {"std", m.std}, {"n", m.n}};
    }
    return s;
}

/// One subcommand: its App, option registry, and the action to run.
struct Command {
    CLI::App* app = nullptr;
    std::unique_ptr<Flags> flags;
    std::string config_path;
    std::function<void()> action;
};

std::string error_family_name(ErrorFamily f) {
    switch (f) {
    case ErrorFamily::Io:
        return "io";
    case ErrorFamily::Validation:
        return "validation";
    case ErrorFamily::Numerical:
        return "numerical";
    }
    return "validation";
}

int report_error(std::ostream& err, const std::string& kind, ErrorFamily family,
                 const std::string& message) {
    const int code = static_cast<int>(family);
    const json line = {{"error", kind},
                       {"family", error_family_name(family)},
                       {"exit_code", code},
                       {"message", message}};
    err << line.dump() << '\n';
    return code;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Align two latent spaces with CCA subspace projection and affine or local-CKA "
                 "matching."};
    app.name("align");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    std::map<std::string, Command> commands;
    auto add_command = [&](const std::string& name, const std::string& description) -> Command& {
        Command& c = commands[name];
        c.app = app.add_subcommand(name, description);
        c.flags = std::make_unique<Flags>(c.app);
        c.app->add_option("--config", c.config_path,
                          "JSON config (or a previous report); flags take precedence");
        return c;
    };

    // gen-synth
    struct {
        std::size_t n = 5500, p = 512, q = 512, k = 20;
        double noise = 3.0;
        std::uint64_t seed = 0;
        bool permute = true;
        std::size_t shapes = 0, points = 64;
        std::string out;
    } gs;
    {
        Command& c = add_command("gen-synth", "Write a synthetic paired dataset");
        Flags& f = *c.flags;
        f.add("n", gs.n, "Samples");
        f.add("p", gs.p, "Width of x (3D side)");
        f.add("q", gs.q, "Width of y (text side)");
        f.add("k", gs.k, "Shared latent dimension");
        f.add("noise", gs.noise, "Noise scale");
        f.add("seed", gs.seed, "Generator seed");
        f.add("permute", gs.permute, "Shuffle y rows so pairing by id is exercised");
        f.add("shapes", gs.shapes, "Also write point clouds for the first N samples");
        f.add("points", gs.points, "Points per cloud");
        f.add_output("out", gs.out, "Output directory");
        c.action = [&, &c = c] {
            require(gs.out, "--out");
            SynthData sd = synth_generate_with_latents({gs.n, gs.p, gs.q, gs.k, gs.noise, gs.seed});
            PairedDataset& ds = sd.data;
            if (gs.permute) {
                SplitMix64 rng = SplitMix64(gs.seed).fork(5);
                const auto perm = sample_without_replacement(gs.n, gs.n, rng);
                std::vector<std::string> ids;
                for (Index i : perm) {
                    ids.push_back(ds.y.ids[i]);
                }
                ds.y.features = select_rows(ds.y.features, perm);
                ds.y.ids = std::move(ids);
            }
            const fs::path manifest = save_paired(gs.out, ds);
            json report = header("gen-synth", *c.flags);
            report["manifest"] = manifest.string();
            report["shapes"] = nullptr;
            if (gs.shapes > 0) {
                if (gs.shapes > gs.n) {
                    fail(ErrorKind::InvalidArgument, "--shapes exceeds --n");
                }
                std::vector<Index> rows(gs.shapes);
                std::iota(rows.begin(), rows.end(), Index{0});
                const auto clouds = synth_shapes(sd.latents, rows, gs.points);
                fs::create_directories(fs::path(gs.out) / "shapes");
                json list = json::array();
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    const std::string rel = "shapes/" + ds.x.ids[rows[i]] + ".npy";
                    save_matrix(fs::path(gs.out) / rel, clouds[i]);
                    list.push_back({{"id", ds.x.ids[rows[i]]}, {"path", rel}});
                }
                const fs::path shapes_manifest = fs::path(gs.out) / "shapes.json";
                std::ofstream sm(shapes_manifest);
                sm << json{{"shapes", list}}.dump(2) << '\n';
                if (!sm) {
                    fail(ErrorKind::IoError, "cannot write " + shapes_manifest.string());
                }
                report["shapes"] = shapes_manifest.string();
            }
            out << report.dump(2) << '\n';
        };
    }

    // validate
    std::string validate_manifest;
    {
        Command& c = add_command("validate", "Load and pair a dataset, report its shape");
        c.flags->add("manifest", validate_manifest, "Paired dataset manifest (JSON)");
        c.action = [&, &c = c] {
            require(validate_manifest, "--manifest");
            const PairingResult p = load_paired(validate_manifest);
            json report = header("validate", *c.flags);
            report["dataset"] = dataset_json(p);
            report["modality_x"] = p.data.x.modality;
            report["modality_y"] = p.data.y.modality;
            out << report.dump(2) << '\n';
        };
    }

    // cca-fit
    struct {
        std::string manifest, dim = "50", out;
        double ridge = 1e-6;
        bool standardize = false;
        std::size_t anchors = 30000;
        std::uint64_t seed = 0;
    } cf;
    {
        Command& c = add_command("cca-fit", "Fit a CCA subspace on anchor pairs and save it");
        Flags& f = *c.flags;
        f.add("manifest", cf.manifest, "Paired dataset manifest (JSON)");
        f.add_token("dim", cf.dim, "Subspace dimension");
        f.add("ridge", cf.ridge, "Relative ridge");
        f.add("cca-standardize", cf.standardize, "Scale columns to unit variance before fitting");
        f.add("anchors", cf.anchors, "Anchor pairs");
        f.add("seed", cf.seed, "Anchor sampling seed");
        f.add_output("out", cf.out, "Model directory");
        c.action = [&, &c = c] {
            require(cf.manifest, "--manifest");
            require(cf.out, "--out");
            const auto dim = parse_dim(cf.dim);
            if (!dim) {
                fail(ErrorKind::InvalidArgument, "cca-fit needs a numeric --dim");
            }
            const PairingResult p = load_paired(cf.manifest);
            const Split split = make_split(p.data.size(), cf.anchors, 0, cf.seed);
            const CcaModel model =
                fit_cca(select_rows(p.data.x.features, split.anchor_indices),
                        select_rows(p.data.y.features, split.anchor_indices), *dim,
                        CcaOptions{cf.ridge, cf.standardize});
            save_cca(cf.out, model);
            json report = header("cca-fit", *c.flags);
            report["dataset"] = dataset_json(p);
            report["correlations"] = vector_json(model.correlations);
            out << report.dump(2) << '\n';
        };
    }

    // affine-fit
    struct {
        std::string manifest, direction = "text-to-3d", cca, solver = "lsq", out;
        double lr = 1e-2;
        std::size_t iters = 10000, anchors = 30000;
        bool bias = true, standardize = true;
        std::uint64_t seed = 0;
    } af;
    {
        Command& c = add_command("affine-fit", "Fit an affine translation on anchor pairs and save it");
        Flags& f = *c.flags;
        f.add("manifest", af.manifest, "Paired dataset manifest (JSON)");
        f.add("direction", af.direction, "text-to-3d | 3d-to-text");
        f.add("cca", af.cca, "CCA model directory; project both sides first");
        f.add("solver", af.solver, "lsq | gd");
        f.add("lr", af.lr, "Gradient descent learning rate");
        f.add("iters", af.iters, "Gradient descent iterations");
        f.add("bias", af.bias, "Fit a bias term");
        f.add("affine-standardize", af.standardize, "Standardize both sides before fitting");
        f.add("anchors", af.anchors, "Anchor pairs");
        f.add("seed", af.seed, "Anchor sampling seed");
        f.add_output("out", af.out, "Model directory");
        c.action = [&, &c = c] {
            require(af.manifest, "--manifest");
            require(af.out, "--out");
            const PairingResult p = load_paired(af.manifest);
            const Roles roles = resolve_roles(p.data, parse_direction(af.direction));
            const AffineSolver solver = parse_solver(af.solver);
            const Split split = make_split(p.data.size(), af.anchors, 0, af.seed);
            auto side = [&](Side s) {
                const Matrix& m = s == Side::X ? p.data.x.features : p.data.y.features;
                return select_rows(m, split.anchor_indices);
            };
            Matrix src = side(roles.source);
            Matrix tgt = side(roles.target);
            if (!af.cca.empty()) {
                const CcaModel model = load_cca(af.cca);
                src = project(model, src, roles.source);
                tgt = project(model, tgt, roles.target);
            }
            AffineMap map;
            if (solver == AffineSolver::Lsq) {
                map = fit_affine_lsq(src, tgt, AffineOptions{af.bias, af.standardize});
            } else {
                map = fit_affine_gd(src, tgt,
                                    GradientDescentOptions{af.lr, af.iters, af.bias, af.standardize});
            }
            save_affine(af.out, map);
            json report = header("affine-fit", *c.flags);
            report["dataset"] = dataset_json(p);
            report["source_side"] = roles.source == Side::X ? "x" : "y";
            report["training_residual"] = map.training_residual;
            out << report.dump(2) << '\n';
        };
    }

    // translate
    struct {
        std::string model, input, cca, side = "y", dtype = "f64", out;
    } tr;
    {
        Command& c = add_command("translate", "Apply a saved affine map to a matrix file");
        Flags& f = *c.flags;
        f.add("model", tr.model, "Affine model directory");
        f.add("input", tr.input, "Input matrix (.npy)");
        f.add("cca", tr.cca, "CCA model directory; project the input first");
        f.add("side", tr.side, "CCA side of the input: x | y");
        f.add("dtype", tr.dtype, "Output dtype: f64 | f32");
        f.add_output("out", tr.out, "Output matrix (.npy)");
        c.action = [&] {
            require(tr.model, "--model");
            require(tr.input, "--input");
            require(tr.out, "--out");
            NpyDtype dtype = NpyDtype::Float64;
            if (tr.dtype == "f32") {
                dtype = NpyDtype::Float32;
            } else if (tr.dtype != "f64") {
                fail(ErrorKind::InvalidArgument, "--dtype must be f64 or f32");
            }
            Matrix m = load_matrix(tr.input);
            if (!tr.cca.empty()) {
                m = project(load_cca(tr.cca), m, parse_side(tr.side));
            }
            save_matrix(tr.out, apply(load_affine(tr.model), m), dtype);
        };
    }

    // cka
    struct {
        std::string manifest, inputs, kernel = "linear", gamma = "median", out, format = "json";
        bool aligned = false, bias = true, standardize = true;
        double fit_fraction = 0.5;
        std::uint64_t seed = 0;
    } ck;
    {
        Command& c = add_command("cka", "CKA heatmap between embedding sets, optionally after affine alignment");
        Flags& f = *c.flags;
        f.add("manifest", ck.manifest, "Paired dataset manifest; contributes its x and y sets");
        f.add_list("inputs", ck.inputs, "Extra row-aligned matrices (.npy)");
        f.add("kernel", ck.kernel, "linear | rbf");
        f.add_token("gamma", ck.gamma, "RBF gamma, or 'median'");
        f.add("aligned", ck.aligned, "Also score every ordered pair after an affine fit");
        f.add("fit-fraction", ck.fit_fraction, "Share of rows used to fit the affine maps");
        f.add("seed", ck.seed, "Fit/eval row split seed");
        f.add("bias", ck.bias, "Fit a bias term");
        f.add("affine-standardize", ck.standardize, "Standardize before the affine fit");
        f.add_output("out", ck.out, "Report path (stdout when omitted)");
        f.add_output("format", ck.format, "json");
        c.action = [&, &c = c] {
            const KernelSpec spec = parse_kernel(ck.kernel, ck.gamma);
            std::vector<EmbeddingSet> sets;
            std::vector<std::string> names;
            if (!ck.manifest.empty()) {
                PairingResult p = load_paired(ck.manifest);
                names.push_back("x:" + p.data.x.modality);
                names.push_back("y:" + p.data.y.modality);
                sets.push_back(std::move(p.data.x));
                sets.push_back(std::move(p.data.y));
            }
            for (const auto& path : split_tokens(ck.inputs)) {
                EmbeddingSet s;
                s.features = load_matrix(path);
                names.push_back(fs::path(path).stem().string());
                sets.push_back(std::move(s));
            }
            if (sets.empty()) {
                fail(ErrorKind::InvalidArgument, "cka needs --manifest or --inputs");
            }
            json report = header("cka", *c.flags);
            report["names"] = names;
            if (!ck.aligned) {
                report["heatmap"] = matrix_json(cka_heatmap(sets, spec));
            } else {
                if (!(ck.fit_fraction > 0.0 && ck.fit_fraction < 1.0)) {
                    fail(ErrorKind::InvalidArgument, "--fit-fraction must lie in (0, 1)");
                }
                const auto n = static_cast<Index>(sets.front().features.rows());
                const auto n_fit = static_cast<Index>(static_cast<double>(n) * ck.fit_fraction);
                const Split split = make_split(n, n_fit, n - n_fit, ck.seed);
                HeatmapAlignment alignment{split.anchor_indices, split.query_indices,
                                           AffineOptions{ck.bias, ck.standardize}};
                std::vector<EmbeddingSet> eval_sets;
                for (const auto& s : sets) {
                    if (static_cast<Index>(s.features.rows()) != n) {
                        fail(ErrorKind::InvalidShape, "heatmap sets have different sample counts");
                    }
                    EmbeddingSet e;
                    e.features = select_rows(s.features, split.query_indices);
                    eval_sets.push_back(std::move(e));
                }
                report["heatmap"] = matrix_json(cka_heatmap(eval_sets, spec));
                report["heatmap_aligned"] = matrix_json(cka_heatmap(sets, spec, alignment));
            }
            emit(report, ck.out, ck.format, out);
        };
    }

    // eval
    EvalFlags ev;
    std::string eval_dim = "50", eval_out, eval_format = "json";
    {
        Command& c = add_command("eval", "Matching accuracy and top-k retrieval over seeds");
        ev.add(*c.flags);
        c.flags->add_token("dim", eval_dim, "CCA subspace dimension, or 'none' to skip projection");
        c.flags->add_output("out", eval_out, "Report path (stdout when omitted)");
        c.flags->add_output("format", eval_format, "json");
        c.action = [&, &c = c] {
            const EvalConfig cfg = ev.config();
            const auto dim = parse_dim(eval_dim);
            const PairingResult p = load_paired(ev.manifest);
            const auto reports = evaluate_seeds(p.data, dim, cfg);
            json report = header("eval", *c.flags);
            report["dataset"] = dataset_json(p);
            report["results"] = reports;
            report["summary"] = summary_json(reports);
            emit(report, eval_out, eval_format, out);
        };
    }

    // ablate-dim
    EvalFlags ad;
    std::string ad_dims = "5,10,20,50,100", ad_out, ad_format = "json";
    {
        Command& c = add_command("ablate-dim", "Retrieval against CCA subspace dimension");
        ad.add(*c.flags);
        c.flags->add_list("dims", ad_dims, "Subspace dimensions");
        c.flags->add_output("out", ad_out, "Report path (stdout when omitted)");
        c.flags->add_output("format", ad_format, "json | csv");
        c.action = [&, &c = c] {
            const EvalConfig cfg = ad.config();
            const auto dims = parse_counts(ad_dims, "--dims", false);
            const PairingResult p = load_paired(ad.manifest);
            json report = header("ablate-dim", *c.flags);
            report["dataset"] = dataset_json(p);
            report["curves"] = ablate_dimension(p.data, dims, cfg);
            emit(report, ad_out, ad_format, out);
        };
    }

    // ablate-anchors
    EvalFlags aa;
    std::string aa_counts = "1000,5000,10000,20000,30000", aa_dims = "50", aa_out,
                aa_format = "json";
    {
        Command& c = add_command("ablate-anchors", "Retrieval against anchor count");
        aa.add(*c.flags);
        c.flags->add_list("counts", aa_counts, "Anchor counts");
        c.flags->add_list("dims", aa_dims, "Subspace dimensions ('none' skips projection)");
        c.flags->add_output("out", aa_out, "Report path (stdout when omitted)");
        c.flags->add_output("format", aa_format, "json | csv");
        c.action = [&, &c = c] {
            const EvalConfig cfg = aa.config();
            const auto counts = parse_counts(aa_counts, "--counts", false);
            const auto dims = parse_counts(aa_dims, "--dims", true);
            const PairingResult p = load_paired(aa.manifest);
            json report = header("ablate-anchors", *c.flags);
            report["dataset"] = dataset_json(p);
            report["curves"] = ablate_anchors(p.data, counts, dims, cfg);
            emit(report, aa_out, aa_format, out);
        };
    }

    // chamfer-corr
    struct {
        std::string manifest, shapes, features = "text", cca, distance = "euclidean", out;
    } cc;
    {
        Command& c = add_command("chamfer-corr",
                                 "Pearson correlation of shape Chamfer distances and feature distances");
        Flags& f = *c.flags;
        f.add("manifest", cc.manifest, "Paired dataset manifest (JSON)");
        f.add("shapes", cc.shapes, "Shape manifest: {\"shapes\": [{\"id\", \"path\"}]}");
        f.add("features", cc.features, "Feature side: text | 3d");
        f.add("cca", cc.cca, "CCA model directory; also report the projected space");
        f.add("distance", cc.distance, "Feature distance: euclidean | cosine");
        f.add_output("out", cc.out, "Report path (stdout when omitted)");
        c.action = [&, &c = c] {
            require(cc.manifest, "--manifest");
            require(cc.shapes, "--shapes");
            FeatureDistance dist = FeatureDistance::Euclidean;
            if (cc.distance == "cosine") {
                dist = FeatureDistance::Cosine;
            } else if (cc.distance != "euclidean") {
                fail(ErrorKind::InvalidArgument, "--distance must be euclidean or cosine");
            }
            if (cc.features != "text" && cc.features != "3d") {
                fail(ErrorKind::InvalidArgument, "--features must be text or 3d");
            }
            const PairingResult p = load_paired(cc.manifest);
            const Roles roles = resolve_roles(p.data, Direction::TextTo3d);
            const Side side = cc.features == "text" ? roles.source : roles.target;
            const EmbeddingSet& set = side == Side::X ? p.data.x : p.data.y;

            std::ifstream in(cc.shapes);
            if (!in) {
                fail(ErrorKind::IoError, "cannot open shape manifest " + cc.shapes);
            }
            const json sm = json::parse(in);
            if (!sm.contains("shapes") || !sm["shapes"].is_array()) {
                fail(ErrorKind::FormatError, cc.shapes + ": needs a 'shapes' array");
            }
            std::unordered_map<std::string, Index> row_of;
            for (Index i = 0; i < set.size(); ++i) {
                row_of.emplace(set.ids[i], i);
            }
            const fs::path base = fs::path(cc.shapes).parent_path();
            std::vector<Matrix> clouds;
            std::vector<Index> rows;
            for (const auto& entry : sm["shapes"]) {
                const auto id = entry.at("id").get<std::string>();
                const auto it = row_of.find(id);
                if (it == row_of.end()) {
                    fail(ErrorKind::PairingError, "shape '" + id + "' has no feature row");
                }
                fs::path path = entry.at("path").get<std::string>();
                if (path.is_relative()) {
                    path = base / path;
                }
                clouds.push_back(load_matrix(path));
                rows.push_back(it->second);
            }
            const Matrix features = select_rows(set.features, rows);
            const auto chamfer = pairwise_chamfer(clouds);
            json report = header("chamfer-corr", *c.flags);
            report["n_shapes"] = clouds.size();
            report["correlation_full"] = latent_distance_correlation(chamfer, features, dist);
            report["correlation_projected"] = nullptr;
            if (!cc.cca.empty()) {
                const Matrix projected = project(load_cca(cc.cca), features, side);
                report["correlation_projected"] = latent_distance_correlation(chamfer, projected, dist);
            }
            emit(report, cc.out, "json", out);
        };
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        try {
            app.parse(reversed);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e, out, err);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e, out, err);
        } catch (const CLI::ParseError& e) {
            return report_error(err, "InvalidArgument", ErrorFamily::Validation, e.what());
        }
        for (auto& [name, cmd] : commands) {
            if (!cmd.app->parsed()) {
                continue;
            }
            if (!cmd.config_path.empty()) {
                json cfg = load_report_json(cmd.config_path);
                if (cfg.contains("config")) {
                    if (cfg.contains("command") && cfg["command"] != name) {
                        fail(ErrorKind::InvalidArgument,
                             cmd.config_path + " is a '" + cfg["command"].get<std::string>() +
                                 "' report, not '" + name + "'");
                    }
                    cfg = cfg["config"];
                }
                cmd.flags->apply(cfg);
            }
            cmd.action();
            return 0;
        }
        return 0;
    } catch (const Error& e) {
        return report_error(err, std::string(error_kind_name(e.kind())), e.family(), e.what());
    } catch (const CLI::Error& e) {
        return report_error(err, "InvalidArgument", ErrorFamily::Validation, e.what());
    } catch (const nlohmann::json::exception& e) {
        return report_error(err, "FormatError", ErrorFamily::Io, e.what());
    } catch (const fs::filesystem_error& e) {
        return report_error(err, "IoError", ErrorFamily::Io, e.what());
    } catch (const std::bad_alloc&) {
        return report_error(err, "OutOfMemory", ErrorFamily::Numerical, "allocation failed");
    } catch (const std::exception& e) {
        return report_error(err, "InvalidArgument", ErrorFamily::Validation, e.what());
    }
}

} // namespace latent_align::cli
