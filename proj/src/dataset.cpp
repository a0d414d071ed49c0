#include "latent_align/dataset.hpp"

#include "latent_align/error.hpp"
#include "latent_align/npy.hpp"
#include "latent_align/random.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace latent_align {

namespace fs = std::filesystem;
using nlohmann::json;

void validate(const EmbeddingSet& set) {
    if (set.ids.size() != static_cast<Index>(set.features.rows())) {
        fail(ErrorKind::DataError, "embedding set '" + set.modality + "' has " +
                                       std::to_string(set.ids.size()) + " ids but " +
                                       std::to_string(set.features.rows()) + " rows");
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : set.ids) {
        if (!seen.insert(id).second) {
            fail(ErrorKind::DataError, "duplicate id '" + id + "' in '" + set.modality + "'");
        }
    }
    require_finite(set.features, set.modality);
}

PairingResult pair_by_id(const EmbeddingSet& x, const EmbeddingSet& y) {
    validate(x);
    validate(y);
    std::unordered_map<std::string, Index> y_rows;
    y_rows.reserve(y.ids.size());
    for (Index i = 0; i < y.ids.size(); ++i) {
        y_rows.emplace(y.ids[i], i);
    }

    std::vector<Index> keep_x;
    std::vector<Index> keep_y;
    for (Index i = 0; i < x.ids.size(); ++i) {
        if (auto it = y_rows.find(x.ids[i]); it != y_rows.end()) {
            keep_x.push_back(i);
            keep_y.push_back(it->second);
        }
    }
    if (keep_x.empty()) {
        fail(ErrorKind::PairingError, "no sample ids are shared between '" + x.modality +
                                          "' and '" + y.modality + "'");
    }

    PairingResult out;
    out.data.x.modality = x.modality;
    out.data.y.modality = y.modality;
    out.data.x.features = select_rows(x.features, keep_x);
    out.data.y.features = select_rows(y.features, keep_y);
    out.data.x.ids.reserve(keep_x.size());
    for (Index i : keep_x) {
        out.data.x.ids.push_back(x.ids[i]);
    }
    out.data.y.ids = out.data.x.ids;
    out.dropped_x = x.size() - keep_x.size();
    out.dropped_y = y.size() - keep_y.size();
    return out;
}

std::vector<std::string> load_ids(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::IoError, "cannot open " + path.string());
    }
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            ids.push_back(line);
        }
    }
    return ids;
}

void save_ids(const fs::path& path, const std::vector<std::string>& ids) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        fail(ErrorKind::IoError, "cannot write " + path.string());
    }
    for (const auto& id : ids) {
        out << id << '\n';
    }
}

namespace {

EmbeddingSet load_side(const json& entry, const fs::path& base, const std::string& side) {
    if (!entry.is_object() || !entry.contains("features") || !entry.contains("ids")) {
        fail(ErrorKind::FormatError, "manifest side '" + side + "' needs 'features' and 'ids'");
    }
    auto resolve = [&](const std::string& p) {
        const fs::path path(p);
        return path.is_absolute() ? path : base / path;
    };
    EmbeddingSet set;
    set.features = load_matrix(resolve(entry.at("features").get<std::string>()));
    set.ids = load_ids(resolve(entry.at("ids").get<std::string>()));
    set.modality = entry.value("modality", side);
    validate(set);
    return set;
}

} // namespace

PairingResult load_paired(const fs::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) {
        fail(ErrorKind::IoError, "cannot open manifest " + manifest_path.string());
    }
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::FormatError, manifest_path.string() + ": " + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("x") || !manifest.contains("y")) {
        fail(ErrorKind::FormatError, manifest_path.string() + ": manifest needs 'x' and 'y'");
    }
    const fs::path base = manifest_path.parent_path();
    try {
        return pair_by_id(load_side(manifest["x"], base, "x"), load_side(manifest["y"], base, "y"));
    } catch (const json::exception& e) {
        fail(ErrorKind::FormatError, manifest_path.string() + ": " + e.what());
    }
}

fs::path save_paired(const fs::path& dir, const PairedDataset& ds) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        fail(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
    }
    save_matrix(dir / "x.npy", ds.x.features);
    save_matrix(dir / "y.npy", ds.y.features);
    save_ids(dir / "x_ids.txt", ds.x.ids);
    save_ids(dir / "y_ids.txt", ds.y.ids);
    const json manifest = {
        {"x", {{"features", "x.npy"}, {"ids", "x_ids.txt"}, {"modality", ds.x.modality}}},
        {"y", {{"features", "y.npy"}, {"ids", "y_ids.txt"}, {"modality", ds.y.modality}}},
    };
    const fs::path path = dir / "manifest.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        fail(ErrorKind::IoError, "cannot write " + path.string());
    }
    out << manifest.dump(2) << '\n';
    return path;
}

Split make_split(Index n, Index n_anchor, Index n_query, std::uint64_t seed) {
    if (n_anchor > n || n_query > n - n_anchor) {
        fail(ErrorKind::InvalidSplit, "cannot draw " + std::to_string(n_anchor) + " anchors and " +
                                          std::to_string(n_query) + " queries from " +
                                          std::to_string(n) + " samples");
    }
    SplitMix64 rng(seed);
    std::vector<Index> order = sample_without_replacement(n, n_anchor + n_query, rng);
    Split split;
    split.seed = seed;
    split.query_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_query));
    split.anchor_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_query), order.end());
    return split;
}

std::string serialize_split(const Split& split) {
    std::ostringstream os;
    os << "seed " << split.seed << "\nanchors";
    for (Index i : split.anchor_indices) {
        os << ' ' << i;
    }
    os << "\nqueries";
    for (Index i : split.query_indices) {
        os << ' ' << i;
    }
    os << '\n';
    return os.str();
}

} // namespace latent_align
