#include "focus/mosaic.hpp"

#include "focus/error.hpp"
#include "focus/image.hpp"
#include "focus/rng.hpp"
#include "focus/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

namespace fs = std::filesystem;

namespace focus {

std::string_view to_string(Quadrant q) {
    switch (q) {
        case Quadrant::TL: return "TL";
        case Quadrant::TR: return "TR";
        case Quadrant::BL: return "BL";
        case Quadrant::BR: return "BR";
    }
    return "?";
}

QuadrantRect quadrant_rect(Quadrant q, int width, int height) {
    const int hw = width / 2;
    const int hh = height / 2;
    switch (q) {
        case Quadrant::TL: return {0, 0, hw, hh};
        case Quadrant::TR: return {hw, 0, width, hh};
        case Quadrant::BL: return {0, hh, hw, height};
        case Quadrant::BR: return {hw, hh, width, height};
    }
    return {0, 0, 0, 0};
}

std::string_view to_string(Layout l) {
    switch (l) {
        case Layout::top_row: return "top-row";
        case Layout::bottom_row: return "bottom-row";
        case Layout::left_col: return "left-col";
        case Layout::right_col: return "right-col";
        case Layout::main_diag: return "main-diag";
        case Layout::anti_diag: return "anti-diag";
    }
    return "?";
}

Layout parse_layout(std::string_view name) {
    for (Layout l : kLayouts) {
        if (to_string(l) == name) return l;
    }
    throw usage_error("unknown layout '" + std::string(name) + "'");
}

std::array<Quadrant, 2> target_positions(Layout l) {
    switch (l) {
        case Layout::top_row: return {Quadrant::TL, Quadrant::TR};
        case Layout::bottom_row: return {Quadrant::BL, Quadrant::BR};
        case Layout::left_col: return {Quadrant::TL, Quadrant::BL};
        case Layout::right_col: return {Quadrant::TR, Quadrant::BR};
        case Layout::main_diag: return {Quadrant::TL, Quadrant::BR};
        case Layout::anti_diag: return {Quadrant::TR, Quadrant::BL};
    }
    return {Quadrant::TL, Quadrant::TR};
}

Layout layout_from_positions(Quadrant a, Quadrant b) {
    if (a > b) std::swap(a, b);
    for (Layout l : kLayouts) {
        const auto p = target_positions(l);
        if (p[0] == a && p[1] == b) return l;
    }
    throw data_error("target quadrants must be two distinct positions");
}

bool is_target(Layout l, Quadrant q) {
    const auto p = target_positions(l);
    return p[0] == q || p[1] == q;
}

std::string_view to_string(MosaicMode m) { return m == MosaicMode::standard ? "standard" : "two-class"; }

MosaicMode parse_mode(std::string_view name) {
    if (name == "standard") return MosaicMode::standard;
    if (name == "two-class") return MosaicMode::two_class;
    throw usage_error("unknown mosaic mode '" + std::string(name) + "'");
}

std::string MosaicSpec::outer_class() const {
    for (Quadrant q : kQuadrants) {
        if (!is_target(layout, q)) return at(q).class_label;
    }
    return {};
}

void validate_spec(const MosaicSpec& spec) {
    auto fail = [&](const std::string& why) { throw data_error("mosaic '" + spec.id + "': " + why); };
    if (spec.width <= 0 || spec.height <= 0 || spec.width % 2 || spec.height % 2)
        fail("width and height must be positive and even");
    std::vector<const QuadrantSource*> targets, outers;
    for (Quadrant q : kQuadrants) {
        (is_target(spec.layout, q) ? targets : outers).push_back(&spec.at(q));
    }
    for (const auto* t : targets) {
        if (t->class_label != spec.target_class) fail("target quadrant does not carry the target class");
    }
    for (const auto* o : outers) {
        if (o->class_label == spec.target_class) fail("non-target quadrant carries the target class");
    }
    if (targets[0]->image_id == targets[1]->image_id) fail("target images must be distinct");
    if (outers[0]->image_id == outers[1]->image_id) fail("outer images must be distinct");
    if (spec.mode == MosaicMode::two_class && outers[0]->class_label != outers[1]->class_label)
        fail("two-class mosaic has outer quadrants of different classes");
}

std::string mosaic_id(const std::string& target_class, std::size_t k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%05zu", k);
    return sanitize_name(target_class) + buf;
}

namespace {

std::size_t draw_other(RandomStream& rng, std::size_t size, std::size_t taken) {
    std::size_t v = rng.below(size - 1);
    return v >= taken ? v + 1 : v;
}

}  // namespace

std::vector<MosaicSpec> plan_mosaics(const DatasetIndex& index, const PlanOptions& options) {
    if (options.width <= 0 || options.height <= 0 || options.width % 2 || options.height % 2)
        throw usage_error("mosaic width and height must be positive and even");
    const auto& classes = index.classes();
    if (classes.size() < 2) throw data_error("mosaics need at least 2 classes");

    std::map<std::string, std::vector<ImageRecord>> pools;
    std::vector<std::string> short_classes;
    for (const auto& cls : classes) {
        std::vector<ImageRecord> pool;
        for (const auto& r : index.records()) {
            if (r.class_label == cls && r.split == Split::eval) pool.push_back(r);
        }
        if (pool.size() < 2) short_classes.push_back(cls + " (" + std::to_string(pool.size()) + ")");
        pools.emplace(cls, std::move(pool));
    }
    if (!short_classes.empty()) {
        std::string list;
        for (const auto& s : short_classes) list += (list.empty() ? "" : ", ") + s;
        throw data_error("classes with fewer than 2 eligible eval images: " + list);
    }

    std::vector<std::string> targets = options.target_classes.empty() ? classes : options.target_classes;
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    std::set<std::string> sanitized;
    for (const auto& t : targets) {
        if (!index.has_class(t)) throw data_error("unknown target class '" + t + "'");
        if (!sanitized.insert(sanitize_name(t)).second)
            throw data_error("class names collide after sanitizing: '" + t + "'");
    }

    std::vector<MosaicSpec> specs;
    specs.reserve(targets.size() * options.per_class);
    for (const auto& tc : targets) {
        const auto& tpool = pools.at(tc);
        std::vector<std::string> others;
        for (const auto& c : classes) {
            if (c != tc) others.push_back(c);
        }
        for (std::size_t k = 0; k < options.per_class; ++k) {
            MosaicSpec spec;
            spec.id = mosaic_id(tc, k);
            spec.target_class = tc;
            spec.width = options.width;
            spec.height = options.height;
            spec.mode = options.mode;

            RandomStream rng(options.seed, spec.id);
            spec.layout = options.layout ? *options.layout : kLayouts[rng.below(kLayouts.size())];

            const std::size_t t1 = rng.below(tpool.size());
            const std::size_t t2 = draw_other(rng, tpool.size(), t1);
            std::array<QuadrantSource, 2> target_src{QuadrantSource{tpool[t1].id, tc},
                                                     QuadrantSource{tpool[t2].id, tc}};

            std::array<QuadrantSource, 2> outer_src;
            if (options.mode == MosaicMode::two_class) {
                const auto& oc = others[rng.below(others.size())];
                const auto& opool = pools.at(oc);
                const std::size_t o1 = rng.below(opool.size());
                const std::size_t o2 = draw_other(rng, opool.size(), o1);
                outer_src = {QuadrantSource{opool[o1].id, oc}, QuadrantSource{opool[o2].id, oc}};
            } else {
                const auto& c1 = others[rng.below(others.size())];
                const auto& p1 = pools.at(c1);
                const std::size_t o1 = rng.below(p1.size());
                const auto& c2 = others[rng.below(others.size())];
                const auto& p2 = pools.at(c2);
                const std::size_t o2 = c1 == c2 ? draw_other(rng, p2.size(), o1) : rng.below(p2.size());
                outer_src = {QuadrantSource{p1[o1].id, c1}, QuadrantSource{p2[o2].id, c2}};
            }

            std::size_t ti = 0, oi = 0;
            for (Quadrant q : kQuadrants) {
                spec.quadrants[static_cast<std::size_t>(q)] =
                    is_target(spec.layout, q) ? target_src[ti++] : outer_src[oi++];
            }
            specs.push_back(std::move(spec));
        }
    }
    std::sort(specs.begin(), specs.end(), [](const MosaicSpec& a, const MosaicSpec& b) { return a.id < b.id; });
    return specs;
}

cv::Mat compose_mosaic(const MosaicSpec& spec, const DatasetIndex& index) {
    validate_spec(spec);
    cv::Mat out(spec.height, spec.width, CV_8UC3, cv::Scalar::all(0));
    for (Quadrant q : kQuadrants) {
        const auto& record = index.record(spec.at(q).image_id);
        auto src = try_decode_image(index.resolve(record));
        if (!src) throw data_error("cannot decode image '" + record.id + "' for mosaic '" + spec.id + "'");
        const auto r = quadrant_rect(q, spec.width, spec.height);
        resize_and_center_crop(*src, r.x1 - r.x0, r.y1 - r.y0).copyTo(out(cv::Rect(r.x0, r.y0, r.x1 - r.x0, r.y1 - r.y0)));
    }
    return out;
}

std::vector<MosaicSpec> MosaicManifest::specs() const {
    std::vector<MosaicSpec> out;
    out.reserve(mosaics.size());
    for (const auto& m : mosaics) out.push_back(m.spec);
    return out;
}

const MosaicEntry* MosaicManifest::find(const std::string& id) const {
    auto it = std::lower_bound(mosaics.begin(), mosaics.end(), id,
                               [](const MosaicEntry& e, const std::string& key) { return e.spec.id < key; });
    return it != mosaics.end() && it->spec.id == id ? &*it : nullptr;
}

nlohmann::json MosaicManifest::to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& m : mosaics) {
        nlohmann::json quads = nlohmann::json::object();
        for (Quadrant q : kQuadrants) {
            quads[std::string(to_string(q))] = {{"image_id", m.spec.at(q).image_id}, {"class", m.spec.at(q).class_label}};
        }
        list.push_back({{"id", m.spec.id},
                        {"file", m.file.generic_string()},
                        {"target_class", m.spec.target_class},
                        {"mode", std::string(to_string(m.spec.mode))},
                        {"quadrants", std::move(quads)}});
    }
    return {{"version", version}, {"seed", seed},           {"dataset_fingerprint", dataset_fingerprint},
            {"width", width},     {"height", height},       {"mosaics", std::move(list)}};
}

std::string MosaicManifest::serialize() const { return to_json().dump(2) + "\n"; }

MosaicManifest MosaicManifest::from_json(const nlohmann::json& j, fs::path directory) {
    MosaicManifest m;
    try {
        m.version = j.at("version").get<std::string>();
        if (m.version != "1") throw data_error("unsupported manifest version '" + m.version + "'");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
        m.width = j.at("width").get<int>();
        m.height = j.at("height").get<int>();
        m.directory = std::move(directory);
        std::set<std::string> ids;
        for (const auto& e : j.at("mosaics")) {
            MosaicEntry entry;
            entry.spec.id = e.at("id").get<std::string>();
            entry.file = e.at("file").get<std::string>();
            entry.spec.target_class = e.at("target_class").get<std::string>();
            entry.spec.mode = parse_mode(e.at("mode").get<std::string>());
            entry.spec.width = m.width;
            entry.spec.height = m.height;
            std::vector<Quadrant> tq;
            for (Quadrant q : kQuadrants) {
                const auto& src = e.at("quadrants").at(std::string(to_string(q)));
                entry.spec.quadrants[static_cast<std::size_t>(q)] = {src.at("image_id").get<std::string>(),
                                                                    src.at("class").get<std::string>()};
                if (entry.spec.at(q).class_label == entry.spec.target_class) tq.push_back(q);
            }
            if (tq.size() != 2)
                throw data_error("mosaic '" + entry.spec.id + "' must have exactly 2 target-class quadrants");
            entry.spec.layout = layout_from_positions(tq[0], tq[1]);
            validate_spec(entry.spec);
            if (!ids.insert(entry.spec.id).second) throw data_error("duplicate mosaic id '" + entry.spec.id + "'");
            m.mosaics.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed manifest: ") + e.what());
    } catch (const Error& e) {
        throw data_error(std::string("invalid manifest: ") + e.what());
    }
    std::sort(m.mosaics.begin(), m.mosaics.end(),
              [](const MosaicEntry& a, const MosaicEntry& b) { return a.spec.id < b.spec.id; });
    return m;
}

MosaicManifest make_manifest(const std::vector<MosaicSpec>& specs, const DatasetIndex& index, std::uint64_t seed) {
    MosaicManifest m;
    m.seed = seed;
    m.dataset_fingerprint = index.fingerprint();
    if (!specs.empty()) {
        m.width = specs.front().width;
        m.height = specs.front().height;
    }
    std::set<std::string> ids;
    for (const auto& s : specs) {
        validate_spec(s);
        if (s.width != m.width || s.height != m.height) throw data_error("mosaics in one set must share geometry");
        if (!ids.insert(s.id).second) throw data_error("duplicate mosaic id '" + s.id + "'");
        m.mosaics.push_back({s, fs::path(s.id + ".png")});
    }
    std::sort(m.mosaics.begin(), m.mosaics.end(),
              [](const MosaicEntry& a, const MosaicEntry& b) { return a.spec.id < b.spec.id; });
    return m;
}

MosaicManifest load_manifest(const fs::path& manifest_json) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(manifest_json));
    } catch (const nlohmann::json::exception& e) {
        throw data_error("cannot parse manifest " + manifest_json.string() + ": " + e.what());
    }
    return MosaicManifest::from_json(j, manifest_json.parent_path());
}

MosaicManifest emit_mosaic_set(const std::vector<MosaicSpec>& specs, const DatasetIndex& index,
                               const fs::path& out_dir, std::uint64_t seed, unsigned jobs) {
    auto manifest = make_manifest(specs, index, seed);
    manifest.directory = out_dir;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw data_error("cannot create " + out_dir.string() + ": " + ec.message());
    const fs::path marker = out_dir / "INCOMPLETE";
    write_file_atomic(marker, "mosaic set generation did not finish\n");

    parallel_for(manifest.mosaics.size(), jobs, [&](std::size_t i) {
        const auto& entry = manifest.mosaics[i];
        write_png(out_dir / entry.file, compose_mosaic(entry.spec, index));
    });
    write_file_atomic(out_dir / "manifest.json", manifest.serialize());
    fs::remove(marker, ec);
    spdlog::info("wrote {} mosaics to {}", manifest.mosaics.size(), out_dir.string());
    return manifest;
}

}  // namespace focus
