#pragma once

#include "focus/attribution_io.hpp"
#include "focus/focus.hpp"
#include "focus/mosaic.hpp"

#include <opencv2/core.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace focus {

struct Exemplar {
    std::string mosaic_id;
    double focus = 0.0;
    std::filesystem::path overlay;  // relative to the report directory; empty until rendered
};

// Focus statistics of one ordered (target, outer) class pair over two-class mosaics.
struct ClassPairBiasReport {
    std::string target_class;
    std::string outer_class;
    std::size_t n = 0;  // mosaics with a defined focus
    double mean_focus = 0.0;
    double std_focus = 0.0;
    std::vector<Exemplar> lowest;   // ascending focus
    std::vector<Exemplar> highest;  // descending focus

    std::string pair_name() const { return target_class + " vs " + outer_class; }
};

// Ranks ordered class pairs by ascending mean focus (ties: pair_name()
// order). Each report keeps up to `exemplars` lowest and highest
// mosaics. Throws if any spec is not a two-class mosaic.
std::vector<ClassPairBiasReport> rank_pairs(std::span<const FocusResult> results, std::span<const MosaicSpec> specs,
                                            std::size_t exemplars = 5);

struct Overlay {
    cv::Mat image;  // 8-bit BGR
    bool no_relevance = false;
};

// Heatmap of the positive relevance (normalized by its maximum, blue ->
// yellow -> red) blended half-and-half over the grayscale mosaic.
Overlay render_overlay(const cv::Mat& mosaic_bgr, const AttributionMap& map);

// PNG with a "focus-bench:relevance" text chunk ("none" or "normalized").
void write_overlay(const std::filesystem::path& path, const Overlay& overlay);

struct BiasReportOptions {
    std::size_t top_pairs = 10;
    std::size_t exemplars = 5;
};

struct BiasReportBundle {
    std::filesystem::path directory;
    std::size_t overlays = 0;  // listed exemplars, lowest + highest
    std::size_t files = 0;     // distinct overlay PNGs written
    std::vector<std::string> warnings;
};

// Writes summary.md, pairs.csv, findings.csv and overlay PNGs
// (<pair>/<mosaic_id>_<focus>.png) for the lowest-mean pairs into out_dir.
BiasReportBundle bias_report(std::vector<ClassPairBiasReport>& ranked, const MosaicManifest& manifest,
                             const std::filesystem::path& attribution_dir, const BiasReportOptions& options,
                             const std::filesystem::path& out_dir, unsigned jobs = 0);

}  // namespace focus
