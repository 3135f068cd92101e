#pragma once

#include "focus/dataset_index.hpp"

#include "json.hpp"
#include <opencv2/core.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace focus {

enum class Quadrant : std::uint8_t { TL = 0, TR = 1, BL = 2, BR = 3 };

inline constexpr std::array<Quadrant, 4> kQuadrants{Quadrant::TL, Quadrant::TR, Quadrant::BL, Quadrant::BR};

std::string_view to_string(Quadrant q);

// Pixel window of a quadrant: rows [y0, y1), cols [x0, x1).
struct QuadrantRect {
    int x0, y0, x1, y1;
};

QuadrantRect quadrant_rect(Quadrant q, int width, int height);

// Which two quadrants hold the target-class images.
enum class Layout : std::uint8_t { top_row, bottom_row, left_col, right_col, main_diag, anti_diag };

inline constexpr std::array<Layout, 6> kLayouts{Layout::top_row,   Layout::bottom_row, Layout::left_col,
                                               Layout::right_col, Layout::main_diag,  Layout::anti_diag};

std::string_view to_string(Layout l);
Layout parse_layout(std::string_view name);

// Target quadrants of a layout, in quadrant order.
std::array<Quadrant, 2> target_positions(Layout l);
// Inverse of target_positions; throws unless the pair names exactly one layout.
Layout layout_from_positions(Quadrant a, Quadrant b);
bool is_target(Layout l, Quadrant q);

enum class MosaicMode : std::uint8_t { standard, two_class };

std::string_view to_string(MosaicMode m);
MosaicMode parse_mode(std::string_view name);

struct QuadrantSource {
    std::string image_id;
    std::string class_label;

    bool operator==(const QuadrantSource&) const = default;
};

struct MosaicSpec {
    std::string id;
    std::string target_class;
    std::array<QuadrantSource, 4> quadrants;  // indexed by Quadrant
    Layout layout = Layout::top_row;
    int width = 448;
    int height = 448;
    MosaicMode mode = MosaicMode::standard;

    const QuadrantSource& at(Quadrant q) const { return quadrants[static_cast<std::size_t>(q)]; }

    // The class of the non-target quadrants in two-class mode.
    std::string outer_class() const;

    bool operator==(const MosaicSpec&) const = default;
};

// Throws data_error when a structural invariant is broken (target count,
// distinct target images, outer classes, even geometry).
void validate_spec(const MosaicSpec& spec);

// nullopt: random layout per mosaic.
using LayoutPolicy = std::optional<Layout>;

struct PlanOptions {
    std::size_t per_class = 100;
    MosaicMode mode = MosaicMode::standard;
    LayoutPolicy layout;
    int width = 448;
    int height = 448;
    std::uint64_t seed = 0;
    // Restricts which classes act as targets; empty means all classes.
    std::vector<std::string> target_classes;
};

// "<class>_<k>" with the class name sanitized for file systems.
std::string mosaic_id(const std::string& target_class, std::size_t k);

// Plans per_class mosaics for every target class, sorted by id.
std::vector<MosaicSpec> plan_mosaics(const DatasetIndex& index, const PlanOptions& options);

// Composes the 8-bit BGR raster (width x height).
cv::Mat compose_mosaic(const MosaicSpec& spec, const DatasetIndex& index);

struct MosaicEntry {
    MosaicSpec spec;
    std::filesystem::path file;  // relative to the manifest directory
};

struct MosaicManifest {
    std::string version = "1";
    std::uint64_t seed = 0;
    std::string dataset_fingerprint;
    int width = 448;
    int height = 448;
    std::vector<MosaicEntry> mosaics;  // sorted by id
    std::filesystem::path directory;   // where manifest.json lives; not serialized

    std::vector<MosaicSpec> specs() const;
    const MosaicEntry* find(const std::string& id) const;

    nlohmann::json to_json() const;
    std::string serialize() const;
    static MosaicManifest from_json(const nlohmann::json& j, std::filesystem::path directory = {});
};

// Manifest for specs without writing any image (files are "<id>.png").
MosaicManifest make_manifest(const std::vector<MosaicSpec>& specs, const DatasetIndex& index, std::uint64_t seed);

MosaicManifest load_manifest(const std::filesystem::path& manifest_json);

// Writes one PNG per spec plus manifest.json into out_dir. While running the
// directory carries an INCOMPLETE marker that is removed on success.
MosaicManifest emit_mosaic_set(const std::vector<MosaicSpec>& specs, const DatasetIndex& index,
                               const std::filesystem::path& out_dir, std::uint64_t seed, unsigned jobs = 0);

}  // namespace focus
