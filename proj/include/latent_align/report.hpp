#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace latent_align {

/// Matching and retrieval metrics for one evaluation run.
struct RetrievalReport {
    double matching_accuracy = 0.0;
    std::map<std::size_t, double> top_k; ///< k -> hit fraction
    std::size_t n_query = 0;
    std::uint64_t seed = 0;
    std::string method;
    std::optional<std::size_t> subspace_dim;

    bool operator==(const RetrievalReport&) const = default;
};

/// One metric swept over one parameter, aggregated across seeds. Standard
/// deviations use the n-1 divisor (0 for a single seed).
struct AblationCurve {
    std::string parameter;
    std::string metric;
    std::vector<double> values;
    std::vector<double> means;
    std::vector<double> stds;
    std::size_t n_seeds = 0;

    bool operator==(const AblationCurve&) const = default;
};

void to_json(nlohmann::json& j, const RetrievalReport& r);
void from_json(const nlohmann::json& j, RetrievalReport& r);
void to_json(nlohmann::json& j, const AblationCurve& c);
void from_json(const nlohmann::json& j, AblationCurve& c);

enum class ReportFormat { Json, Csv };

/// "json" or "csv"; anything else throws InvalidArgument.
ReportFormat parse_report_format(std::string_view name);

/// Serialize a report. JSON writes the object as-is. CSV needs a "curves" array
/// and writes `param,metric,mean,std,n_seeds`, one row per curve point.
void save_report(const nlohmann::json& report, const std::filesystem::path& path,
                 ReportFormat format);

nlohmann::json load_report_json(const std::filesystem::path& path);

/// Parse a CSV written by save_report back into curves (grouped by metric, in
/// first-appearance order). The parameter name is not stored in CSV.
std::vector<AblationCurve> load_curves_csv(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

} // namespace latent_align
