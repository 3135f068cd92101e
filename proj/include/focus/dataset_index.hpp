#pragma once

#include "json.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace focus {

enum class Split { train, eval };

std::string_view to_string(Split s);

struct ImageRecord {
    std::string id;           // "<class>/<filename>"
    std::filesystem::path path;  // relative to the index root
    std::string class_label;
    Split split = Split::eval;

    bool operator==(const ImageRecord&) const = default;
};

// How records are assigned to the train / eval splits.
namespace split_rule {
// Every image is eval.
struct AllEval {};
// root/train/<class>/* and root/eval/<class>/*.
struct Subdirectories {};
// The first `count` images of each class (by filename) are train.
struct FirstPerClass {
    std::size_t count = 0;
};
// Listed files (paths relative to root, one per line) are train; the rest eval.
struct TrainList {
    std::filesystem::path list_file;
};
}  // namespace split_rule

using SplitRule = std::variant<split_rule::AllEval, split_rule::Subdirectories,
                               split_rule::FirstPerClass, split_rule::TrainList>;

// Parses "all-eval", "subdirs", "first-n:<N>", "train-list:<file>".
SplitRule parse_split_rule(const std::string& text);

struct ScanSummary {
    std::size_t scanned = 0;
    std::vector<std::string> skipped;  // undecodable files, relative paths

    bool operator==(const ScanSummary&) const = default;
};

class DatasetIndex {
public:
    DatasetIndex() = default;
    // Sorts records by id and derives the class set. Throws on duplicate ids,
    // empty class labels or classes without records.
    DatasetIndex(std::filesystem::path root, std::vector<ImageRecord> records, ScanSummary summary = {});

    const std::filesystem::path& root() const { return root_; }
    const std::vector<ImageRecord>& records() const { return records_; }
    const std::vector<std::string>& classes() const { return classes_; }
    const ScanSummary& summary() const { return summary_; }

    const ImageRecord& record(const std::string& id) const;
    bool has_class(const std::string& label) const;

    std::size_t train_count() const;

    // Path of a record on disk.
    std::filesystem::path resolve(const ImageRecord& r) const { return root_ / r.path; }

    nlohmann::json to_json() const;
    static DatasetIndex from_json(const nlohmann::json& j);

    // Serialized form (stable key order, records sorted by id).
    std::string serialize() const;

    // SHA-256 over the serialized records and classes, excluding the root
    // directory so copies of one dataset on different machines agree.
    std::string fingerprint() const;

private:
    std::filesystem::path root_;
    std::vector<ImageRecord> records_;
    std::vector<std::string> classes_;
    ScanSummary summary_;
};

// Scans a directory-per-class tree. Only .png/.jpg/.jpeg files are scanned;
// undecodable ones are skipped with a warning.
DatasetIndex build_index(const std::filesystem::path& root, const SplitRule& rule, unsigned jobs = 0);

// Reads a `path,label,split` CSV. Relative paths resolve against the CSV's directory.
DatasetIndex build_index_from_csv(const std::filesystem::path& csv, unsigned jobs = 0);

DatasetIndex load_index(const std::filesystem::path& index_json);

// Eval-split records of one class. Throws for unknown classes or empty pools.
std::vector<ImageRecord> eligible_pool(const DatasetIndex& index, const std::string& class_label);

}  // namespace focus
