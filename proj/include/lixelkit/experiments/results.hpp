#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "lixelkit/experiments/training.hpp"

namespace lixelkit::exp {

/// First line of every metrics CSV. Bump the version when columns change.
inline constexpr const char* kCsvSchema = "# lixelkit-results v1";

/// Schema line plus the column header, newline terminated.
std::string csv_header();
/// One CSV line (no wall time), newline terminated.
std::string csv_row(const ResultRow& row);
void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
/// Parses a file written by write_csv (wall time reads back as 0).
std::vector<ResultRow> read_csv(const std::filesystem::path& path);

nlohmann::json to_json(const ResultRow& row);
nlohmann::json to_json(const EvalResult& r);

double median(std::vector<double> values);
double mean(const std::vector<double>& values);
/// Sample standard deviation over sqrt(n); 0 for fewer than two values.
double standard_error(const std::vector<double>& values);

/// Final-step metrics of one variant across seeds.
struct VariantSummary {
    std::string variant;
    std::vector<std::uint64_t> seeds;
    std::vector<double> mpjpe;
    std::vector<double> pa_mpjpe;
    std::size_t parameters = 0;
    std::size_t head_parameters = 0;
    std::uint64_t cells = 0;

    double median_mpjpe() const { return median(mpjpe); }
    double median_pa_mpjpe() const { return median(pa_mpjpe); }
};

/// Groups rows by variant (first-appearance order) keeping each seed's last step.
std::vector<VariantSummary> summarize(const std::vector<ResultRow>& rows);

/// Markdown table of the summaries.
std::string format_table(const std::vector<VariantSummary>& summaries);

}  // namespace lixelkit::exp
