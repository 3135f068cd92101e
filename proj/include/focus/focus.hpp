#pragma once

#include "focus/attribution_io.hpp"
#include "focus/mosaic.hpp"

#include "json.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace focus {

struct FocusResult {
    std::string mosaic_id;
    std::string target_class;
    // Sum of positive relevance inside each quadrant, indexed by Quadrant.
    std::array<double, 4> quadrant_relevance{};
    // Empty when the map carries no positive relevance at all.
    std::optional<double> focus;
    std::array<Quadrant, 2> target_positions{Quadrant::TL, Quadrant::TR};

    bool defined() const { return focus.has_value(); }
};

AttributionMap clamp_positive(AttributionMap map);

// Fraction of positive relevance lying on the target quadrants of `spec`.
// `values` is a row-major width x height grid; negatives count as zero.
// Sums are accumulated in double precision.
template <typename T>
FocusResult compute_focus(std::span<const T> values, int width, int height, const MosaicSpec& spec);

FocusResult compute_focus(const AttributionMap& map, const MosaicSpec& spec);

// Reads every map of a validated run and scores it. Throws when the run is
// incomplete.
std::vector<FocusResult> score_run(const MosaicManifest& manifest, const std::filesystem::path& attribution_dir,
                                   unsigned jobs = 0);

struct ClassStats {
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0;
};

inline constexpr std::size_t kHistogramBins = 50;

struct FocusDistribution {
    std::string label;
    std::size_t n_defined = 0;
    std::size_t n_undefined = 0;
    double mean = 0.0;
    double std = 0.0;  // population
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    std::vector<std::size_t> histogram;  // kHistogramBins uniform bins over [0, 1]
    std::map<std::string, ClassStats> per_class;
    double class_balanced_mean = 0.0;  // unweighted mean of per-class means

    nlohmann::json to_json() const;
};

// Statistics over defined focus values. Results are sorted by mosaic id
// before reduction, so input order never changes the output.
FocusDistribution aggregate(std::span<const FocusResult> results, std::span<const MosaicSpec> specs,
                            std::string label = {});

// Linear-interpolated quantile (p in [0, 1]) of sorted values.
double quantile_sorted(std::span<const double> sorted, double p);

// Defined focus values in mosaic-id order.
std::vector<double> defined_values(std::span<const FocusResult> results);

std::string results_csv(std::span<const FocusResult> results);

inline constexpr std::size_t kKdePoints = 256;

struct KdeCurve {
    std::vector<double> x;        // kKdePoints evenly spaced over [0, 1]
    std::vector<double> density;
    double bandwidth = 0.0;
};

// Gaussian kernel density estimate with Silverman's bandwidth, reflected at
// 0 and 1 since focus values live on [0, 1]. Throws on degenerate input.
KdeCurve kde_curve(std::span<const double> values);

}  // namespace focus
