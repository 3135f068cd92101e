#include "focus/attribution_io.hpp"

#include "focus/error.hpp"
#include "focus/util.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace focus {

namespace {

void put_le32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::string_view s, std::size_t at, int bytes) {
    std::uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[at + static_cast<std::size_t>(i)]);
    return v;
}

}  // namespace

std::string_view to_string(FormatErrorCode code) {
    switch (code) {
        case FormatErrorCode::io: return "io";
        case FormatErrorCode::truncated_header: return "truncated header";
        case FormatErrorCode::bad_magic: return "bad magic";
        case FormatErrorCode::nonzero_reserved: return "nonzero reserved field";
        case FormatErrorCode::zero_dimension: return "zero dimension";
        case FormatErrorCode::truncated_payload: return "truncated payload";
        case FormatErrorCode::size_mismatch: return "size mismatch";
        case FormatErrorCode::non_finite: return "non-finite relevance";
    }
    return "?";
}

std::string encode_foc1(const AttributionMap& map) {
    if (map.width <= 0 || map.height <= 0)
        throw FormatError(FormatErrorCode::zero_dimension, "attribution map has a zero dimension");
    const std::size_t n = static_cast<std::size_t>(map.width) * static_cast<std::size_t>(map.height);
    if (map.values.size() != n)
        throw FormatError(FormatErrorCode::size_mismatch, "attribution map holds " + std::to_string(map.values.size()) +
                                                              " values for " + std::to_string(n) + " pixels");
    for (float v : map.values) {
        if (!std::isfinite(v)) throw FormatError(FormatErrorCode::non_finite, "non-finite relevance");
    }
    std::string out;
    out.reserve(kFoc1HeaderSize + 4 * n);
    out.append("FOC1", 4);
    put_le32(out, static_cast<std::uint32_t>(map.width));
    put_le32(out, static_cast<std::uint32_t>(map.height));
    out.append(4, '\0');
    if constexpr (std::endian::native == std::endian::little) {
        out.append(reinterpret_cast<const char*>(map.values.data()), 4 * n);
    } else {
        for (float v : map.values) put_le32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

AttributionMap decode_foc1(std::string_view bytes) {
    if (bytes.size() < kFoc1HeaderSize)
        throw FormatError(FormatErrorCode::truncated_header, "file shorter than the 16-byte header");
    if (bytes.substr(0, 4) != "FOC1") throw FormatError(FormatErrorCode::bad_magic, "bad magic (expected FOC1)");
    const std::uint64_t width = get_le(bytes, 4, 4);
    const std::uint64_t height = get_le(bytes, 8, 4);
    if (get_le(bytes, 12, 4) != 0) throw FormatError(FormatErrorCode::nonzero_reserved, "reserved header field is not 0");
    if (width == 0 || height == 0) throw FormatError(FormatErrorCode::zero_dimension, "zero width or height");
    if (width > 0x7FFFFFFF || height > 0x7FFFFFFF)
        throw FormatError(FormatErrorCode::size_mismatch, "dimensions exceed the supported range");
    const std::uint64_t n = width * height;
    const std::uint64_t expected = kFoc1HeaderSize + 4 * n;
    if (bytes.size() < expected)
        throw FormatError(FormatErrorCode::truncated_payload,
                          "truncated payload: header claims " + std::to_string(width) + "x" + std::to_string(height) +
                              " but file has " + std::to_string((bytes.size() - kFoc1HeaderSize) / 4) + " floats");
    if (bytes.size() > expected)
        throw FormatError(FormatErrorCode::size_mismatch, "file is longer than its header declares");

    AttributionMap map;
    map.width = static_cast<int>(width);
    map.height = static_cast<int>(height);
    map.values.resize(static_cast<std::size_t>(n));
    const char* payload = bytes.data() + kFoc1HeaderSize;
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(map.values.data(), payload, 4 * static_cast<std::size_t>(n));
    } else {
        for (std::size_t i = 0; i < map.values.size(); ++i)
            map.values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, kFoc1HeaderSize + 4 * i, 4)));
    }
    for (float v : map.values) {
        if (!std::isfinite(v)) throw FormatError(FormatErrorCode::non_finite, "non-finite relevance");
    }
    return map;
}

void write_map(const AttributionMap& map, const fs::path& path) {
    const auto bytes = encode_foc1(map);
    try {
        write_file_atomic(path, bytes);
    } catch (const Error& e) {
        throw FormatError(FormatErrorCode::io, e.what());
    }
}

AttributionMap read_map(const fs::path& path) {
    std::string bytes;
    try {
        bytes = read_file(path);
    } catch (const Error& e) {
        throw FormatError(FormatErrorCode::io, e.what());
    }
    auto map = decode_foc1(bytes);
    auto stem = path.filename().string();
    if (stem.size() > 5 && stem.ends_with(".foc1")) stem.resize(stem.size() - 5);
    std::string id;
    for (std::size_t i = 0; i < stem.size(); ++i) {
        if (stem.compare(i, 2, "__") == 0) {
            id.push_back('/');
            ++i;
        } else {
            id.push_back(stem[i]);
        }
    }
    map.mosaic_id = std::move(id);
    return map;
}

std::string attribution_filename(std::string_view mosaic_id) {
    std::string out;
    for (char c : mosaic_id) {
        if (c == '/') out += "__";
        else out.push_back(c);
    }
    return out + ".foc1";
}

std::string_view to_string(MapStatus s) {
    switch (s) {
        case MapStatus::valid: return "valid";
        case MapStatus::missing: return "missing";
        case MapStatus::corrupt: return "corrupt";
        case MapStatus::dimension_mismatch: return "dimension-mismatch";
    }
    return "?";
}

bool ValidationReport::complete() const { return count(MapStatus::valid) == entries.size(); }

std::size_t ValidationReport::count(MapStatus s) const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.status == s;
    return n;
}

std::string ValidationReport::describe_problems(std::size_t limit) const {
    std::ostringstream out;
    std::size_t shown = 0, total = 0;
    for (const auto& e : entries) {
        if (e.status == MapStatus::valid) continue;
        ++total;
        if (shown < limit) {
            out << "  " << e.mosaic_id << ": " << to_string(e.status);
            if (!e.detail.empty()) out << " (" << e.detail << ")";
            out << "\n";
            ++shown;
        }
    }
    if (total > shown) out << "  ... and " << (total - shown) << " more\n";
    return out.str();
}

ValidationReport validate_run(const MosaicManifest& manifest, const fs::path& attribution_dir, unsigned jobs) {
    ValidationReport report;
    report.entries.resize(manifest.mosaics.size());
    parallel_for(manifest.mosaics.size(), jobs, [&](std::size_t i) {
        const auto& spec = manifest.mosaics[i].spec;
        auto& entry = report.entries[i];
        entry.mosaic_id = spec.id;
        const fs::path path = attribution_dir / attribution_filename(spec.id);
        std::error_code ec;
        if (!fs::exists(path, ec)) {
            entry.status = MapStatus::missing;
            return;
        }
        // A map that decodes but has the wrong size is a dimension mismatch;
        // anything that fails to decode is corrupt.
        try {
            const auto map = decode_foc1(read_file(path));
            if (map.width != spec.width || map.height != spec.height) {
                entry.status = MapStatus::dimension_mismatch;
                entry.detail = std::to_string(map.width) + "x" + std::to_string(map.height) + " for a " +
                               std::to_string(spec.width) + "x" + std::to_string(spec.height) + " mosaic";
                return;
            }
            entry.status = MapStatus::valid;
        } catch (const FormatError& e) {
            entry.status = MapStatus::corrupt;
            entry.detail = e.what();
        } catch (const Error& e) {
            entry.status = MapStatus::corrupt;
            entry.detail = e.what();
        }
    });
    return report;
}

}  // namespace focus
