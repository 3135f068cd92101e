#include "focus/bias.hpp"

#include "focus/error.hpp"
#include "focus/image.hpp"
#include "focus/util.hpp"

#include <opencv2/imgproc.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace fs = std::filesystem;

namespace focus {

std::vector<ClassPairBiasReport> rank_pairs(std::span<const FocusResult> results, std::span<const MosaicSpec> specs,
                                            std::size_t exemplars) {
    std::unordered_map<std::string, const MosaicSpec*> by_id;
    for (const auto& s : specs) {
        if (s.mode != MosaicMode::two_class)
            throw data_error("bias mining needs two-class mosaics; '" + s.id + "' is standard");
        by_id.emplace(s.id, &s);
    }

    std::map<std::pair<std::string, std::string>, std::vector<Exemplar>> groups;
    std::map<std::pair<std::string, std::string>, std::size_t> undefined;
    for (const auto& r : results) {
        auto it = by_id.find(r.mosaic_id);
        if (it == by_id.end()) throw data_error("result for unknown mosaic '" + r.mosaic_id + "'");
        const auto key = std::make_pair(it->second->target_class, it->second->outer_class());
        if (r.focus) groups[key].push_back({r.mosaic_id, *r.focus, {}});
        else ++undefined[key];
    }
    for (const auto& [key, count] : undefined) {
        if (!groups.count(key))
            spdlog::warn("pair {} vs {} has no defined focus ({} empty maps); left out of the ranking", key.first,
                         key.second, count);
    }

    std::vector<ClassPairBiasReport> reports;
    for (auto& [key, items] : groups) {
        // Ascending by (focus, id) makes the extremes independent of input order.
        std::sort(items.begin(), items.end(), [](const Exemplar& a, const Exemplar& b) {
            return std::tie(a.focus, a.mosaic_id) < std::tie(b.focus, b.mosaic_id);
        });
        ClassPairBiasReport rep;
        rep.target_class = key.first;
        rep.outer_class = key.second;
        rep.n = items.size();
        double sum = 0.0;
        for (const auto& e : items) sum += e.focus;
        rep.mean_focus = sum / static_cast<double>(items.size());
        double ss = 0.0;
        for (const auto& e : items) ss += (e.focus - rep.mean_focus) * (e.focus - rep.mean_focus);
        rep.std_focus = std::sqrt(ss / static_cast<double>(items.size()));
        const std::size_t k = std::min(exemplars, items.size());
        rep.lowest.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(k));
        std::vector<Exemplar> desc(items.rbegin(), items.rend());
        std::stable_sort(desc.begin(), desc.end(), [](const Exemplar& a, const Exemplar& b) {
            return a.focus != b.focus ? a.focus > b.focus : a.mosaic_id < b.mosaic_id;
        });
        rep.highest.assign(desc.begin(), desc.begin() + static_cast<std::ptrdiff_t>(k));
        reports.push_back(std::move(rep));
    }
    std::sort(reports.begin(), reports.end(), [](const ClassPairBiasReport& a, const ClassPairBiasReport& b) {
        if (a.mean_focus != b.mean_focus) return a.mean_focus < b.mean_focus;
        const auto na = a.pair_name(), nb = b.pair_name();
        if (na != nb) return na < nb;
        return std::tie(a.target_class, a.outer_class) < std::tie(b.target_class, b.outer_class);
    });
    return reports;
}

namespace {

// 0 -> blue, 0.5 -> yellow, 1 -> red; returned as RGB.
std::array<double, 3> ramp(double v) {
    v = std::clamp(v, 0.0, 1.0);
    if (v <= 0.5) {
        const double t = v / 0.5;
        return {255.0 * t, 255.0 * t, 255.0 * (1.0 - t)};
    }
    const double t = (v - 0.5) / 0.5;
    return {255.0, 255.0 * (1.0 - t), 0.0};
}

}  // namespace

Overlay render_overlay(const cv::Mat& mosaic_bgr, const AttributionMap& map) {
    if (mosaic_bgr.type() != CV_8UC3) throw data_error("overlay base must be an 8-bit color image");
    if (mosaic_bgr.cols != map.width || mosaic_bgr.rows != map.height)
        throw data_error("attribution map " + std::to_string(map.width) + "x" + std::to_string(map.height) +
                         " does not match mosaic image " + std::to_string(mosaic_bgr.cols) + "x" +
                         std::to_string(mosaic_bgr.rows));
    cv::Mat gray;
    cv::cvtColor(mosaic_bgr, gray, cv::COLOR_BGR2GRAY);

    float max_value = 0.0f;
    for (float v : map.values) max_value = std::max(max_value, v);

    Overlay out;
    if (!(max_value > 0.0f)) {
        cv::cvtColor(gray, out.image, cv::COLOR_GRAY2BGR);
        out.no_relevance = true;
        return out;
    }
    out.image.create(map.height, map.width, CV_8UC3);
    for (int y = 0; y < map.height; ++y) {
        const auto* g = gray.ptr<std::uint8_t>(y);
        auto* o = out.image.ptr<cv::Vec3b>(y);
        for (int x = 0; x < map.width; ++x) {
            const double v = std::max(map.at(x, y), 0.0f) / static_cast<double>(max_value);
            const auto rgb = ramp(v);
            for (int c = 0; c < 3; ++c) {
                // BGR storage: channel c holds rgb[2 - c].
                o[x][c] = cv::saturate_cast<std::uint8_t>(std::lround(0.5 * g[x] + 0.5 * rgb[2 - c]));
            }
        }
    }
    return out;
}

void write_overlay(const fs::path& path, const Overlay& overlay) {
    write_png(path, overlay.image, {{"focus-bench:relevance", overlay.no_relevance ? "none" : "normalized"}});
}

BiasReportBundle bias_report(std::vector<ClassPairBiasReport>& ranked, const MosaicManifest& manifest,
                             const fs::path& attribution_dir, const BiasReportOptions& options, const fs::path& out_dir,
                             unsigned jobs) {
    BiasReportBundle bundle;
    bundle.directory = out_dir;
    auto warn = [&](std::string msg) {
        spdlog::warn("{}", msg);
        bundle.warnings.push_back(std::move(msg));
    };

    std::size_t k = options.top_pairs;
    if (k > ranked.size()) {
        warn("requested " + std::to_string(k) + " pairs but only " + std::to_string(ranked.size()) + " exist");
        k = ranked.size();
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw data_error("cannot create " + out_dir.string() + ": " + ec.message());

    struct Job {
        std::string mosaic_id;
        fs::path rel;
    };
    std::vector<Job> work;
    std::size_t listed = 0;
    for (std::size_t p = 0; p < k; ++p) {
        auto& rep = ranked[p];
        const std::size_t j = std::min(options.exemplars, rep.lowest.size());
        if (j < options.exemplars)
            warn("pair " + rep.pair_name() + " has " + std::to_string(j) + " exemplars per extreme (requested " +
                 std::to_string(options.exemplars) + ")");
        rep.lowest.resize(j);
        rep.highest.resize(std::min(j, rep.highest.size()));
        const fs::path pair_dir = sanitize_name(rep.target_class) + "__vs__" + sanitize_name(rep.outer_class);
        fs::create_directories(out_dir / pair_dir, ec);
        for (auto* list : {&rep.lowest, &rep.highest}) {
            for (auto& e : *list) {
                std::string stem = attribution_filename(e.mosaic_id);
                stem.resize(stem.size() - 5);  // drop ".foc1"
                e.overlay = pair_dir / (stem + "_" + format_double(e.focus, 4) + ".png");
                ++listed;
                // A mosaic can be both among the lowest and the highest of a small pair.
                const bool seen = std::any_of(work.begin(), work.end(), [&](const Job& w) { return w.rel == e.overlay; });
                if (!seen) work.push_back({e.mosaic_id, e.overlay});
            }
        }
    }

    parallel_for(work.size(), jobs, [&](std::size_t i) {
        const auto& id = work[i].mosaic_id;
        const auto* entry = manifest.find(id);
        if (!entry) throw data_error("mosaic '" + id + "' is not in the manifest");
        auto mosaic = try_decode_image(manifest.directory / entry->file);
        if (!mosaic) throw data_error("cannot decode mosaic image for '" + id + "'");
        AttributionMap map;
        try {
            map = read_map(attribution_dir / attribution_filename(id));
        } catch (const FormatError& e) {
            throw data_error("attribution for '" + id + "': " + e.what());
        }
        write_overlay(out_dir / work[i].rel, render_overlay(*mosaic, map));
    });
    bundle.overlays = listed;
    bundle.files = work.size();

    std::ostringstream pairs;
    pairs << "target,outer,n,mean,std\n";
    for (const auto& rep : ranked) {
        pairs << csv_escape(rep.target_class) << ',' << csv_escape(rep.outer_class) << ',' << rep.n << ','
              << format_double(rep.mean_focus) << ',' << format_double(rep.std_focus) << '\n';
    }
    write_file_atomic(out_dir / "pairs.csv", pairs.str());

    std::ostringstream findings;
    findings << "pair,mosaic_id,bias_type,note\n";
    std::ostringstream md;
    md << "# Class-pair bias review\n\n"
       << "Two-class mosaics ranked by mean Focus, lowest first. For each of the " << k
       << " lowest pairs the mosaics with the lowest and highest Focus are shown as heatmap overlays "
       << "(blue = low relevance, yellow = mid, red = highest).\n\n"
       << "Review each overlay and record a finding in `findings.csv` with `bias_type` set to one of:\n\n"
       << "- `shared`: evidence of the target class appears on an outer-class image.\n"
       << "- `missing`: expected target-class evidence is absent from a target-class image.\n"
       << "- `other`: anything else worth noting.\n\n"
       << "Typical corrective actions are adding training images that show the shared pattern in the "
       << "outer class, or target-class images lacking the pattern the model relies on.\n\n";
    for (std::size_t p = 0; p < k; ++p) {
        const auto& rep = ranked[p];
        md << "## " << (p + 1) << ". " << rep.target_class << " (target) vs " << rep.outer_class << " (outer)\n\n"
           << "n = " << rep.n << ", mean Focus = " << format_double(rep.mean_focus, 4)
           << ", std = " << format_double(rep.std_focus, 4) << "\n\n";
        for (const auto& [title, list] : {std::pair{"Lowest Focus", &rep.lowest}, std::pair{"Highest Focus", &rep.highest}}) {
            md << "### " << title << "\n\n| mosaic | focus | overlay |\n|---|---|---|\n";
            for (const auto& e : *list) {
                md << "| " << e.mosaic_id << " | " << format_double(e.focus, 4) << " | ![" << e.mosaic_id << "]("
                   << e.overlay.generic_string() << ") |\n";
                findings << csv_escape(rep.pair_name()) << ',' << csv_escape(e.mosaic_id) << ",,\n";
            }
            md << '\n';
        }
    }
    write_file_atomic(out_dir / "summary.md", md.str());
    write_file_atomic(out_dir / "findings.csv", findings.str());
    return bundle;
}

}  // namespace focus
