#include "focus/sanity.hpp"

#include "focus/error.hpp"
#include "focus/rng.hpp"
#include "focus/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace focus {

std::string_view to_string(SyntheticKind k) {
    switch (k) {
        case SyntheticKind::uniform: return "uniform";
        case SyntheticKind::iid_uniform_random: return "iid-uniform-random";
        case SyntheticKind::target_perfect: return "target-perfect";
        case SyntheticKind::anti_target: return "anti-target";
        case SyntheticKind::gaussian_blob: return "gaussian-blob";
    }
    return "?";
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
    for (auto k : {SyntheticKind::uniform, SyntheticKind::iid_uniform_random, SyntheticKind::target_perfect,
                   SyntheticKind::anti_target, SyntheticKind::gaussian_blob}) {
        if (to_string(k) == name) return k;
    }
    throw usage_error("unknown synthetic explainer '" + std::string(name) + "'");
}

AttributionMap synthesize_map(const MosaicSpec& spec, const SyntheticExplainer& explainer) {
    AttributionMap map;
    map.mosaic_id = spec.id;
    map.width = spec.width;
    map.height = spec.height;
    map.values.assign(static_cast<std::size_t>(spec.width) * static_cast<std::size_t>(spec.height), 0.0f);

    switch (explainer.kind) {
        case SyntheticKind::uniform:
            std::fill(map.values.begin(), map.values.end(), 1.0f);
            break;
        case SyntheticKind::iid_uniform_random: {
            RandomStream rng(explainer.seed, spec.id);
            for (float& v : map.values) v = rng.unit_float();
            break;
        }
        case SyntheticKind::target_perfect:
        case SyntheticKind::anti_target: {
            const bool on_target = explainer.kind == SyntheticKind::target_perfect;
            for (Quadrant q : kQuadrants) {
                if (is_target(spec.layout, q) != on_target) continue;
                const auto r = quadrant_rect(q, spec.width, spec.height);
                for (int y = r.y0; y < r.y1; ++y)
                    for (int x = r.x0; x < r.x1; ++x) map.at(x, y) = 1.0f;
            }
            break;
        }
        case SyntheticKind::gaussian_blob: {
            const double cx = explainer.center_x * spec.width;
            const double cy = explainer.center_y * spec.height;
            const double s = explainer.sigma * std::min(spec.width, spec.height);
            if (!(s > 0.0)) throw usage_error("gaussian-blob sigma must be positive");
            for (int y = 0; y < spec.height; ++y) {
                for (int x = 0; x < spec.width; ++x) {
                    const double dx = x + 0.5 - cx;
                    const double dy = y + 0.5 - cy;
                    map.at(x, y) = static_cast<float>(std::exp(-(dx * dx + dy * dy) / (2.0 * s * s)));
                }
            }
            break;
        }
    }
    return map;
}

void generate_synthetic(const MosaicManifest& manifest, const SyntheticExplainer& explainer, const fs::path& out_dir,
                        unsigned jobs) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw data_error("cannot create " + out_dir.string() + ": " + ec.message());
    parallel_for(manifest.mosaics.size(), jobs, [&](std::size_t i) {
        const auto& spec = manifest.mosaics[i].spec;
        try {
            write_map(synthesize_map(spec, explainer), out_dir / attribution_filename(spec.id));
        } catch (const FormatError& e) {
            throw data_error(e.what());
        }
    });
    spdlog::info("wrote {} synthetic ({}) maps to {}", manifest.mosaics.size(), to_string(explainer.kind),
                 out_dir.string());
}

ScoredRun load_scored_run(const fs::path& manifest_json, const fs::path& attribution_dir, std::string label,
                          unsigned jobs) {
    const auto manifest = load_manifest(manifest_json);
    ScoredRun run;
    run.label = std::move(label);
    run.results = score_run(manifest, attribution_dir, jobs);
    run.specs = manifest.specs();
    return run;
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw data_error("ks statistic needs two non-empty samples");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double n = static_cast<double>(x.size());
    const double m = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() || j < y.size()) {
        double v;
        if (j >= y.size() || (i < x.size() && x[i] <= y[j])) v = x[i];
        else v = y[j];
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    return d;
}

nlohmann::json ComparisonReport::to_json() const {
    return {{"a", {{"label", label_a}, {"distribution", a.to_json()}}},
            {"b", {{"label", label_b}, {"distribution", b.to_json()}}},
            {"mean_difference", mean_difference},
            {"ks", ks}};
}

namespace {

std::vector<MosaicSpec> sorted_specs(std::vector<MosaicSpec> specs) {
    std::sort(specs.begin(), specs.end(), [](const MosaicSpec& x, const MosaicSpec& y) { return x.id < y.id; });
    return specs;
}

}  // namespace

ComparisonReport compare_runs(const ScoredRun& a, const ScoredRun& b) {
    if (sorted_specs(a.specs) != sorted_specs(b.specs))
        throw data_error("incomparable runs: '" + a.label + "' and '" + b.label + "' score different mosaic sets");
    ComparisonReport report;
    report.label_a = a.label;
    report.label_b = b.label;
    report.a = aggregate(a.results, a.specs, a.label);
    report.b = aggregate(b.results, b.specs, b.label);
    report.mean_difference = report.a.mean - report.b.mean;
    report.ks = ks_statistic(defined_values(a.results), defined_values(b.results));
    return report;
}

std::vector<std::string> layout_configurations() {
    std::vector<std::string> out;
    for (Layout l : kLayouts) out.emplace_back(to_string(l));
    out.emplace_back("random");
    return out;
}

LayoutPolicy configuration_policy(const std::string& name) {
    if (name == "random") return std::nullopt;
    return parse_layout(name);
}

std::vector<LayoutRow> layout_experiment(const std::map<std::string, ScoredRun>& runs) {
    std::vector<LayoutRow> rows;
    std::set<std::string> reference_targets;
    bool first = true;
    for (const auto& config : layout_configurations()) {
        auto it = runs.find(config);
        if (it == runs.end()) throw data_error("layout study is missing the '" + config + "' run");
        std::set<std::string> targets;
        for (const auto& s : it->second.specs) targets.insert(s.target_class);
        if (first) {
            reference_targets = targets;
            first = false;
        } else if (targets != reference_targets) {
            throw data_error("layout run '" + config + "' uses a different target class set");
        }
        rows.push_back({config, aggregate(it->second.results, it->second.specs, config)});
    }
    return rows;
}

std::string layout_table_csv(std::span<const LayoutRow> rows) {
    std::ostringstream out;
    out << "layout,n,mean,std,q1,median,q3\n";
    for (const auto& r : rows) {
        const auto& d = r.distribution;
        out << r.configuration << ',' << d.n_defined << ',' << format_double(d.mean) << ',' << format_double(d.std)
            << ',' << format_double(d.q1) << ',' << format_double(d.median) << ',' << format_double(d.q3) << '\n';
    }
    return out.str();
}

std::string layout_values_csv(const std::map<std::string, ScoredRun>& runs) {
    std::ostringstream out;
    out << "layout,mosaic_id,focus\n";
    for (const auto& config : layout_configurations()) {
        auto it = runs.find(config);
        if (it == runs.end()) continue;
        std::vector<const FocusResult*> sorted;
        for (const auto& r : it->second.results) sorted.push_back(&r);
        std::sort(sorted.begin(), sorted.end(),
                  [](const FocusResult* x, const FocusResult* y) { return x->mosaic_id < y->mosaic_id; });
        for (const auto* r : sorted) {
            if (!r->focus) continue;
            out << config << ',' << csv_escape(r->mosaic_id) << ',' << format_double(*r->focus, 10) << '\n';
        }
    }
    return out.str();
}

std::vector<LayoutRow> run_layout_study(const DatasetIndex& index, PlanOptions options, const fs::path& out_dir,
                                        const AttributionProducer& produce, unsigned jobs) {
    std::map<std::string, ScoredRun> runs;
    for (const auto& config : layout_configurations()) {
        options.layout = configuration_policy(config);
        const fs::path base = out_dir / config;
        const auto specs = plan_mosaics(index, options);
        emit_mosaic_set(specs, index, base / "mosaics", options.seed, jobs);
        produce(base / "mosaics" / "manifest.json", base / "attributions");
        runs.emplace(config, load_scored_run(base / "mosaics" / "manifest.json", base / "attributions", config, jobs));
        spdlog::info("layout study: finished configuration {}", config);
    }
    auto rows = layout_experiment(runs);
    write_file_atomic(out_dir / "layout_table.csv", layout_table_csv(rows));
    write_file_atomic(out_dir / "layout_values.csv", layout_values_csv(runs));
    return rows;
}

}  // namespace focus
