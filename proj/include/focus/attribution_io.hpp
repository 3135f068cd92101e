#pragma once

// FOC1 attribution-map files.
//
//   offset  size  field
//   0       4     magic "FOC1" (46 4F 43 31)
//   4       4     width,  u32 little-endian
//   8       4     height, u32 little-endian
//   12      4     reserved, u32 little-endian, must be 0
//   16      4*W*H float32 little-endian, row-major, top row first
//
// File size must be exactly 16 + 4*W*H.

#include "focus/mosaic.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace focus {

struct AttributionMap {
    std::string mosaic_id;
    int width = 0;
    int height = 0;
    std::vector<float> values;  // row-major, height * width

    float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const AttributionMap&) const = default;
};

enum class FormatErrorCode {
    io,
    truncated_header,
    bad_magic,
    nonzero_reserved,
    zero_dimension,
    truncated_payload,
    size_mismatch,
    non_finite,
};

std::string_view to_string(FormatErrorCode code);

class FormatError : public std::runtime_error {
public:
    FormatError(FormatErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    FormatErrorCode code() const noexcept { return code_; }

private:
    FormatErrorCode code_;
};

inline constexpr std::size_t kFoc1HeaderSize = 16;

std::string encode_foc1(const AttributionMap& map);
// mosaic_id of the result is left empty; callers know it from the file name.
AttributionMap decode_foc1(std::string_view bytes);

void write_map(const AttributionMap& map, const std::filesystem::path& path);
AttributionMap read_map(const std::filesystem::path& path);

// "<mosaic_id>.foc1" with '/' replaced by "__".
std::string attribution_filename(std::string_view mosaic_id);

enum class MapStatus { valid, missing, corrupt, dimension_mismatch };

std::string_view to_string(MapStatus s);

struct MapCheck {
    std::string mosaic_id;
    MapStatus status = MapStatus::missing;
    std::string detail;
};

struct ValidationReport {
    std::vector<MapCheck> entries;  // manifest order (sorted by id)

    bool complete() const;
    std::size_t count(MapStatus s) const;
    // Human-readable listing of every non-valid entry.
    std::string describe_problems(std::size_t limit = 20) const;
};

ValidationReport validate_run(const MosaicManifest& manifest, const std::filesystem::path& attribution_dir,
                              unsigned jobs = 0);

}  // namespace focus
