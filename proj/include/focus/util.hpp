#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace focus {

// Runs fn(i) for i in [0, count) on up to `jobs` threads. jobs == 0 means
// one thread per logical CPU. The first exception thrown by any call is
// rethrown on the calling thread once all workers have stopped.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn);

unsigned default_jobs();

// Lower-case hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// Writes through a temporary sibling and renames, so readers never observe
// a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Splits one CSV record. Handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

std::string csv_escape(std::string_view field);

// Replaces every character outside [A-Za-z0-9._-] with '_'.
std::string sanitize_name(std::string_view s);

// Fixed-notation formatting used in every CSV/markdown export.
std::string format_double(double v, int precision = 6);

// Reads FOCUS_BENCH_LOG and configures the default logger.
void init_logging();

}  // namespace focus
