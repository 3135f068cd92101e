#include "focus/dataset_index.hpp"

#include "focus/error.hpp"
#include "focus/image.hpp"
#include "focus/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace focus {

std::string_view to_string(Split s) { return s == Split::train ? "train" : "eval"; }

namespace {

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "eval") return Split::eval;
    throw data_error("unknown split '" + s + "' (expected train or eval)");
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

bool is_hidden(const fs::path& p) {
    const auto name = p.filename().string();
    return !name.empty() && name.front() == '.';
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool want_dirs) {
    std::vector<fs::path> out;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
        if (is_hidden(e.path())) continue;
        if (want_dirs ? e.is_directory() : (e.is_regular_file() && is_image_file(e.path())))
            out.push_back(e.path());
    }
    if (ec) throw data_error("cannot read directory " + dir.string() + ": " + ec.message());
    std::sort(out.begin(), out.end());
    return out;
}

struct Candidate {
    fs::path relative;  // to root
    std::string class_label;
    Split split = Split::eval;
    std::string sort_key;  // filename, for per-class ordering
};

// Decodes every candidate and returns the decodable ones in input order.
std::vector<Candidate> filter_decodable(const fs::path& root, std::vector<Candidate> candidates,
                                        ScanSummary& summary, unsigned jobs) {
    std::vector<char> ok(candidates.size(), 0);
    parallel_for(candidates.size(), jobs, [&](std::size_t i) {
        ok[i] = try_decode_image(root / candidates[i].relative).has_value() ? 1 : 0;
    });
    summary.scanned += candidates.size();
    std::vector<Candidate> kept;
    kept.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (ok[i]) {
            kept.push_back(std::move(candidates[i]));
        } else {
            spdlog::warn("skipping undecodable image {}", candidates[i].relative.generic_string());
            summary.skipped.push_back(candidates[i].relative.generic_string());
        }
    }
    std::sort(summary.skipped.begin(), summary.skipped.end());
    return kept;
}

ImageRecord to_record(const Candidate& c) {
    // The id is the root-relative path, so train/ and eval/ copies stay distinct.
    return ImageRecord{c.relative.generic_string(), c.relative, c.class_label, c.split};
}

void require_nonempty_classes(const std::vector<std::string>& class_dirs, const std::vector<Candidate>& kept) {
    std::set<std::string> present;
    for (const auto& c : kept) present.insert(c.class_label);
    for (const auto& cls : class_dirs) {
        if (!present.count(cls)) throw data_error("class '" + cls + "' has no images");
    }
}

}  // namespace

SplitRule parse_split_rule(const std::string& text) {
    if (text == "all-eval") return split_rule::AllEval{};
    if (text == "subdirs") return split_rule::Subdirectories{};
    if (text.rfind("first-n:", 0) == 0) {
        const std::string n = text.substr(8);
        if (n.empty() || !std::all_of(n.begin(), n.end(), [](unsigned char c) { return std::isdigit(c); }))
            throw usage_error("bad split rule '" + text + "'");
        return split_rule::FirstPerClass{static_cast<std::size_t>(std::stoull(n))};
    }
    if (text.rfind("train-list:", 0) == 0) return split_rule::TrainList{text.substr(11)};
    throw usage_error("unknown split rule '" + text + "' (all-eval | subdirs | first-n:N | train-list:FILE)");
}

DatasetIndex::DatasetIndex(fs::path root, std::vector<ImageRecord> records, ScanSummary summary)
    : root_(std::move(root)), records_(std::move(records)), summary_(std::move(summary)) {
    std::sort(records_.begin(), records_.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });
    std::set<std::string> classes;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (i > 0 && records_[i].id == records_[i - 1].id)
            throw data_error("duplicate record id '" + records_[i].id + "'");
        if (records_[i].class_label.empty()) throw data_error("record '" + records_[i].id + "' has an empty class");
        classes.insert(records_[i].class_label);
    }
    classes_.assign(classes.begin(), classes.end());
}

const ImageRecord& DatasetIndex::record(const std::string& id) const {
    auto it = std::lower_bound(records_.begin(), records_.end(), id,
                               [](const ImageRecord& r, const std::string& key) { return r.id < key; });
    if (it == records_.end() || it->id != id) throw data_error("unknown image id '" + id + "'");
    return *it;
}

bool DatasetIndex::has_class(const std::string& label) const {
    return std::binary_search(classes_.begin(), classes_.end(), label);
}

std::size_t DatasetIndex::train_count() const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [](const ImageRecord& r) { return r.split == Split::train; }));
}

nlohmann::json DatasetIndex::to_json() const {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : records_) {
        records.push_back({{"id", r.id}, {"path", r.path.generic_string()}, {"class", r.class_label},
                           {"split", std::string(to_string(r.split))}});
    }
    return {
        {"version", "1"},
        {"root", root_.generic_string()},
        {"classes", classes_},
        {"records", std::move(records)},
        {"summary", {{"scanned", summary_.scanned}, {"skipped", summary_.skipped}}},
    };
}

DatasetIndex DatasetIndex::from_json(const nlohmann::json& j) {
    try {
        if (j.at("version") != "1") throw data_error("unsupported index version");
        std::vector<ImageRecord> records;
        for (const auto& r : j.at("records")) {
            records.push_back(ImageRecord{r.at("id").get<std::string>(), fs::path(r.at("path").get<std::string>()),
                                          r.at("class").get<std::string>(),
                                          parse_split(r.at("split").get<std::string>())});
        }
        ScanSummary summary;
        if (j.contains("summary")) {
            summary.scanned = j["summary"].at("scanned").get<std::size_t>();
            summary.skipped = j["summary"].at("skipped").get<std::vector<std::string>>();
        }
        return DatasetIndex(fs::path(j.at("root").get<std::string>()), std::move(records), std::move(summary));
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed index: ") + e.what());
    }
}

std::string DatasetIndex::serialize() const { return to_json().dump(2) + "\n"; }

std::string DatasetIndex::fingerprint() const {
    auto j = to_json();
    j.erase("root");
    j.erase("summary");
    return sha256_hex(j.dump());
}

DatasetIndex build_index(const fs::path& root, const SplitRule& rule, unsigned jobs) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw data_error("dataset root is not a readable directory: " + root.string());

    std::vector<Candidate> candidates;
    std::vector<std::string> class_dirs;

    auto collect = [&](const fs::path& base, const fs::path& rel_prefix, Split split) {
        for (const auto& dir : sorted_entries(base, true)) {
            const std::string cls = dir.filename().string();
            class_dirs.push_back(cls);
            for (const auto& file : sorted_entries(dir, false)) {
                candidates.push_back(Candidate{rel_prefix / cls / file.filename(), cls, split,
                                               file.filename().string()});
            }
        }
    };

    if (std::holds_alternative<split_rule::Subdirectories>(rule)) {
        const bool has_train = fs::is_directory(root / "train");
        if (!fs::is_directory(root / "eval")) throw data_error("subdirs split rule requires " + (root / "eval").string());
        if (has_train) collect(root / "train", "train", Split::train);
        collect(root / "eval", "eval", Split::eval);
    } else {
        collect(root, "", Split::eval);
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    class_dirs.erase(std::unique(class_dirs.begin(), class_dirs.end()), class_dirs.end());

    ScanSummary summary;
    auto kept = filter_decodable(root, std::move(candidates), summary, jobs);
    require_nonempty_classes(class_dirs, kept);

    if (const auto* first = std::get_if<split_rule::FirstPerClass>(&rule)) {
        std::map<std::string, std::vector<Candidate*>> by_class;
        for (auto& c : kept) by_class[c.class_label].push_back(&c);
        for (auto& [cls, items] : by_class) {
            std::sort(items.begin(), items.end(),
                      [](const Candidate* a, const Candidate* b) { return a->sort_key < b->sort_key; });
            for (std::size_t i = 0; i < items.size(); ++i)
                items[i]->split = i < first->count ? Split::train : Split::eval;
        }
    } else if (const auto* list = std::get_if<split_rule::TrainList>(&rule)) {
        std::ifstream in(list->list_file);
        if (!in) throw data_error("cannot read train list " + list->list_file.string());
        std::set<std::string> listed;
        for (std::string line; std::getline(in, line);) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (!line.empty()) listed.insert(fs::path(line).lexically_normal().generic_string());
        }
        std::size_t matched = 0;
        for (auto& c : kept) {
            if (listed.count(c.relative.lexically_normal().generic_string())) {
                c.split = Split::train;
                ++matched;
            }
        }
        if (matched != listed.size())
            spdlog::warn("{} train-list entries did not match a scanned image", listed.size() - matched);
    }

    std::vector<ImageRecord> records;
    records.reserve(kept.size());
    for (const auto& c : kept) records.push_back(to_record(c));
    if (!summary.skipped.empty())
        spdlog::warn("indexed {} images, skipped {} undecodable", records.size(), summary.skipped.size());
    return DatasetIndex(fs::absolute(root).lexically_normal(), std::move(records), std::move(summary));
}

DatasetIndex build_index_from_csv(const fs::path& csv, unsigned jobs) {
    std::ifstream in(csv);
    if (!in) throw data_error("cannot read dataset manifest " + csv.string());
    std::string line;
    if (!std::getline(in, line)) throw data_error("empty dataset manifest " + csv.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Tolerate a UTF-8 byte-order mark.
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (split_csv_line(line) != std::vector<std::string>{"path", "label", "split"})
        throw data_error("dataset manifest header must be 'path,label,split'");

    const fs::path root = fs::absolute(csv).parent_path().lexically_normal();
    std::vector<Candidate> candidates;
    std::set<std::string> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 3) throw data_error("dataset manifest line " + std::to_string(line_no) + ": expected 3 fields");
        if (fields[1].empty()) throw data_error("dataset manifest line " + std::to_string(line_no) + ": empty label");
        fs::path rel(fields[0]);
        candidates.push_back(Candidate{rel, fields[1], parse_split(fields[2]), rel.filename().string()});
        labels.insert(fields[1]);
    }
    ScanSummary summary;
    auto kept = filter_decodable(root, std::move(candidates), summary, jobs);
    require_nonempty_classes({labels.begin(), labels.end()}, kept);
    std::vector<ImageRecord> records;
    for (const auto& c : kept) records.push_back(to_record(c));
    return DatasetIndex(root, std::move(records), std::move(summary));
}

DatasetIndex load_index(const fs::path& index_json) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(index_json));
    } catch (const nlohmann::json::exception& e) {
        throw data_error("cannot parse index " + index_json.string() + ": " + e.what());
    }
    return DatasetIndex::from_json(j);
}

std::vector<ImageRecord> eligible_pool(const DatasetIndex& index, const std::string& class_label) {
    if (!index.has_class(class_label)) throw data_error("unknown class '" + class_label + "'");
    std::vector<ImageRecord> pool;
    for (const auto& r : index.records()) {
        if (r.class_label == class_label && r.split == Split::eval) pool.push_back(r);
    }
    if (pool.empty()) throw data_error("no eval samples for class '" + class_label + "'");
    return pool;
}

}  // namespace focus
