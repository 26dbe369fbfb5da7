#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lixelkit/experiments/results.hpp"

namespace lixelkit::exp {

enum class AblationKind { representation, layout, cascade, marginalization };

std::string to_string(AblationKind kind);
AblationKind parse_ablation(const std::string& name);

struct AblationVariant {
    std::string name;
    ExperimentConfig cfg;
};

/// A variant whose config fails validation (e.g. a voxel heatmap over the cell budget).
struct RefusedVariant {
    std::string name;
    std::string reason;
    std::uint64_t cells = 0;
};

/// Variants derived from `base`. Invalid ones land in `refused` when given,
/// otherwise they throw.
std::vector<AblationVariant> ablation_variants(AblationKind kind, const ExperimentConfig& base,
                                               std::vector<RefusedVariant>* refused = nullptr);

/// Ordering claim "better <= worse" on per-seed final MPJPE. The gap is the
/// difference of medians; the standard error is that of the paired per-seed
/// differences. |gap| below the error is a tie; a larger negative gap fails.
struct TrendCheck {
    std::string better;
    std::string worse;
    double gap = 0.0;
    double standard_error = 0.0;
    enum class Verdict { holds, tie, violated } verdict = Verdict::violated;

    bool passed() const { return verdict != Verdict::violated; }
    std::string describe() const;
};

TrendCheck check_order(const VariantSummary& better, const VariantSummary& worse);

struct MemoryRow {
    heatmap::LayoutKind layout;
    std::uint64_t vertices;
    std::uint64_t resolution;
    std::uint64_t cells;
};

/// Cell counts of all three layouts at one (V, D).
std::vector<MemoryRow> memory_table(std::uint64_t vertices, std::uint64_t resolution);

struct AblationReport {
    AblationKind kind;
    std::string experiment;
    std::vector<ResultRow> rows;
    std::vector<VariantSummary> summaries;
    std::vector<RefusedVariant> refused;
    std::vector<TrendCheck> trends;
    EvalResult noise_floor;
    nlohmann::json extra = nlohmann::json::object();

    const VariantSummary& summary(const std::string& variant) const;
};

struct AblationOptions {
    /// Restricts the run to these variant names (empty: all).
    std::vector<std::string> only;
    std::function<void(const std::string&)> progress;
};

AblationReport run_ablation(AblationKind kind, const ExperimentConfig& base, const AblationOptions& options = {});

/// <dir>/<id>_<kind>.csv, .json and .md.
void write_report(const AblationReport& report, const std::filesystem::path& dir);

}  // namespace lixelkit::exp
