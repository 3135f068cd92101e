#pragma once

// Synthetic explainers and run comparisons used to validate the metric
// without any trained model.

#include "focus/focus.hpp"
#include "focus/mosaic.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace focus {

enum class SyntheticKind { uniform, iid_uniform_random, target_perfect, anti_target, gaussian_blob };

std::string_view to_string(SyntheticKind k);
SyntheticKind parse_synthetic_kind(std::string_view name);

struct SyntheticExplainer {
    SyntheticKind kind = SyntheticKind::uniform;
    std::uint64_t seed = 0;
    // gaussian-blob only: center as a fraction of width/height, sigma as a
    // fraction of the shorter mosaic side.
    double center_x = 0.5;
    double center_y = 0.5;
    double sigma = 0.15;
};

// The map the explainer would emit for one mosaic. Random kinds draw from a
// stream keyed by (seed, mosaic id), so output never depends on ordering.
AttributionMap synthesize_map(const MosaicSpec& spec, const SyntheticExplainer& explainer);

// Writes one .foc1 per mosaic into out_dir.
void generate_synthetic(const MosaicManifest& manifest, const SyntheticExplainer& explainer,
                        const std::filesystem::path& out_dir, unsigned jobs = 0);

// Focus results of one attribution run together with the mosaics they score.
struct ScoredRun {
    std::string label;
    std::vector<FocusResult> results;
    std::vector<MosaicSpec> specs;
};

ScoredRun load_scored_run(const std::filesystem::path& manifest_json, const std::filesystem::path& attribution_dir,
                          std::string label, unsigned jobs = 0);

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::span<const double> a, std::span<const double> b);

struct ComparisonReport {
    std::string label_a;
    std::string label_b;
    FocusDistribution a;
    FocusDistribution b;
    double mean_difference = 0.0;  // a - b
    double ks = 0.0;

    nlohmann::json to_json() const;
};

// Both runs must score the same mosaic set.
ComparisonReport compare_runs(const ScoredRun& a, const ScoredRun& b);

// Layout-study configuration names: the six fixed layouts, then "random".
std::vector<std::string> layout_configurations();
LayoutPolicy configuration_policy(const std::string& name);

struct LayoutRow {
    std::string configuration;
    FocusDistribution distribution;
};

// One row per configuration, in layout_configurations() order. Throws when
// a configuration is missing or runs disagree on target classes.
std::vector<LayoutRow> layout_experiment(const std::map<std::string, ScoredRun>& runs);

std::string layout_table_csv(std::span<const LayoutRow> rows);
// Long-format per-mosaic values for box plots: configuration,mosaic_id,focus.
std::string layout_values_csv(const std::map<std::string, ScoredRun>& runs);

// Produces attributions for the manifest at `manifest_json` into `out_dir`.
using AttributionProducer =
    std::function<void(const std::filesystem::path& manifest_json, const std::filesystem::path& out_dir)>;

// Plans, composes and explains one mosaic set per configuration under
// out_dir/<configuration>/, then writes layout_table.csv and
// layout_values.csv into out_dir.
std::vector<LayoutRow> run_layout_study(const DatasetIndex& index, PlanOptions options,
                                        const std::filesystem::path& out_dir, const AttributionProducer& produce,
                                        unsigned jobs = 0);

}  // namespace focus
