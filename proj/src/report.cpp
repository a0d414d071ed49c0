#include "latent_align/report.hpp"

#include "latent_align/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace latent_align {

using nlohmann::json;

void to_json(json& j, const RetrievalReport& r) {
    json top = json::object();
    for (const auto& [k, v] : r.top_k) {
        top[std::to_string(k)] = v;
    }
    j = json{{"matching_accuracy", r.matching_accuracy},
             {"top_k", top},
             {"n_query", r.n_query},
             {"seed", r.seed},
             {"method", r.method},
             {"subspace_dim", r.subspace_dim ? json(*r.subspace_dim) : json(nullptr)}};
}

void from_json(const json& j, RetrievalReport& r) {
    r.matching_accuracy = j.at("matching_accuracy").get<double>();
    r.top_k.clear();
    for (const auto& [k, v] : j.at("top_k").items()) {
        r.top_k[std::stoul(k)] = v.get<double>();
    }
    r.n_query = j.at("n_query").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.method = j.at("method").get<std::string>();
    const auto& dim = j.at("subspace_dim");
    r.subspace_dim = dim.is_null() ? std::nullopt : std::optional(dim.get<std::size_t>());
}

void to_json(json& j, const AblationCurve& c) {
    j = json{{"parameter", c.parameter}, {"metric", c.metric}, {"values", c.values},
             {"means", c.means},         {"stds", c.stds},     {"n_seeds", c.n_seeds}};
}

void from_json(const json& j, AblationCurve& c) {
    c.parameter = j.at("parameter").get<std::string>();
    c.metric = j.at("metric").get<std::string>();
    c.values = j.at("values").get<std::vector<double>>();
    c.means = j.at("means").get<std::vector<double>>();
    c.stds = j.at("stds").get<std::vector<double>>();
    c.n_seeds = j.at("n_seeds").get<std::size_t>();
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "json") {
        return ReportFormat::Json;
    }
    if (name == "csv") {
        return ReportFormat::Csv;
    }
    fail(ErrorKind::InvalidArgument, "unknown report format '" + std::string(name) +
                                         "' (expected json or csv)");
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void save_report(const json& report, const std::filesystem::path& path, ReportFormat format) {
    std::ostringstream body;
    if (format == ReportFormat::Json) {
        body << report.dump(2) << '\n';
    } else {
        if (!report.contains("curves") || !report["curves"].is_array()) {
            fail(ErrorKind::InvalidArgument, "CSV output needs a report with curves");
        }
        body << "param,metric,mean,std,n_seeds\n";
        for (const auto& jc : report["curves"]) {
            const auto c = jc.get<AblationCurve>();
            for (std::size_t i = 0; i < c.values.size(); ++i) {
                body << format_double(c.values[i]) << ',' << c.metric << ','
                     << format_double(c.means[i]) << ',' << format_double(c.stds[i]) << ','
                     << c.n_seeds << '\n';
            }
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorKind::IoError, "cannot write report to " + path.string());
    }
    out << body.str();
    if (!out) {
        fail(ErrorKind::IoError, "failed writing report to " + path.string());
    }
}

json load_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::IoError, "cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::FormatError, path.string() + ": " + e.what());
    }
}

std::vector<AblationCurve> load_curves_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::IoError, "cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "param,metric,mean,std,n_seeds") {
        fail(ErrorKind::FormatError, path.string() + ": unexpected CSV header");
    }
    std::vector<AblationCurve> curves;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::istringstream row(line);
        for (std::string cell; std::getline(row, cell, ',');) {
            cells.push_back(cell);
        }
        if (cells.size() != 5) {
            fail(ErrorKind::FormatError, path.string() + ": malformed row '" + line + "'");
        }
        auto it = std::find_if(curves.begin(), curves.end(),
                               [&](const AblationCurve& c) { return c.metric == cells[1]; });
        if (it == curves.end()) {
            curves.push_back(AblationCurve{});
            it = std::prev(curves.end());
            it->metric = cells[1];
        }
        it->values.push_back(std::stod(cells[0]));
        it->means.push_back(std::stod(cells[2]));
        it->stds.push_back(std::stod(cells[3]));
        it->n_seeds = std::stoul(cells[4]);
    }
    return curves;
}

} // namespace latent_align
