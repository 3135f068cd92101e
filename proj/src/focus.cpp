#include "focus/focus.hpp"

#include "focus/error.hpp"
#include "focus/util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace fs = std::filesystem;

namespace focus {

AttributionMap clamp_positive(AttributionMap map) {
    for (float& v : map.values) v = std::max(v, 0.0f);
    return map;
}

template <typename T>
FocusResult compute_focus(std::span<const T> values, int width, int height, const MosaicSpec& spec) {
    if (width != spec.width || height != spec.height)
        throw data_error("attribution map " + std::to_string(width) + "x" + std::to_string(height) +
                         " does not match mosaic '" + spec.id + "' (" + std::to_string(spec.width) + "x" +
                         std::to_string(spec.height) + ")");
    if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw data_error("attribution map for '" + spec.id + "' has the wrong number of values");

    FocusResult result;
    result.mosaic_id = spec.id;
    result.target_class = spec.target_class;
    result.target_positions = target_positions(spec.layout);

    for (Quadrant q : kQuadrants) {
        const auto r = quadrant_rect(q, width, height);
        double sum = 0.0;
        for (int y = r.y0; y < r.y1; ++y) {
            const T* row = values.data() + static_cast<std::size_t>(y) * width;
            for (int x = r.x0; x < r.x1; ++x) {
                const T v = row[x];
                if (!std::isfinite(v)) throw data_error("non-finite relevance in map for '" + spec.id + "'");
                if (v > 0) sum += static_cast<double>(v);
            }
        }
        result.quadrant_relevance[static_cast<std::size_t>(q)] = sum;
    }

    const auto& r = result.quadrant_relevance;
    const auto [t0, t1] = result.target_positions;
    double target = r[static_cast<std::size_t>(t0)] + r[static_cast<std::size_t>(t1)];
    double outer = 0.0;
    for (Quadrant q : kQuadrants) {
        if (q != t0 && q != t1) outer += r[static_cast<std::size_t>(q)];
    }
    const double total = target + outer;
    if (total > 0.0) result.focus = target / total;
    return result;
}

template FocusResult compute_focus<float>(std::span<const float>, int, int, const MosaicSpec&);
template FocusResult compute_focus<double>(std::span<const double>, int, int, const MosaicSpec&);

FocusResult compute_focus(const AttributionMap& map, const MosaicSpec& spec) {
    return compute_focus<float>(std::span<const float>(map.values), map.width, map.height, spec);
}

std::vector<FocusResult> score_run(const MosaicManifest& manifest, const fs::path& attribution_dir, unsigned jobs) {
    const auto report = validate_run(manifest, attribution_dir, jobs);
    if (!report.complete())
        throw data_error("attribution run in " + attribution_dir.string() + " is incomplete:\n" +
                         report.describe_problems());
    std::vector<FocusResult> results(manifest.mosaics.size());
    parallel_for(manifest.mosaics.size(), jobs, [&](std::size_t i) {
        const auto& spec = manifest.mosaics[i].spec;
        results[i] = compute_focus(read_map(attribution_dir / attribution_filename(spec.id)), spec);
    });
    return results;
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

namespace {

std::vector<const FocusResult*> sorted_by_id(std::span<const FocusResult> results) {
    std::vector<const FocusResult*> out;
    out.reserve(results.size());
    for (const auto& r : results) out.push_back(&r);
    std::sort(out.begin(), out.end(), [](const FocusResult* a, const FocusResult* b) { return a->mosaic_id < b->mosaic_id; });
    return out;
}

ClassStats mean_std(std::span<const double> v) {
    ClassStats s;
    s.n = v.size();
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size()));
    return s;
}

}  // namespace

std::vector<double> defined_values(std::span<const FocusResult> results) {
    std::vector<double> out;
    for (const auto* r : sorted_by_id(results)) {
        if (r->focus) out.push_back(*r->focus);
    }
    return out;
}

FocusDistribution aggregate(std::span<const FocusResult> results, std::span<const MosaicSpec> specs, std::string label) {
    std::unordered_map<std::string, const MosaicSpec*> by_id;
    for (const auto& s : specs) by_id.emplace(s.id, &s);

    FocusDistribution d;
    d.label = std::move(label);
    std::vector<double> values;
    std::map<std::string, std::vector<double>> per_class;
    for (const auto* r : sorted_by_id(results)) {
        auto it = by_id.find(r->mosaic_id);
        if (it == by_id.end()) throw data_error("result for unknown mosaic '" + r->mosaic_id + "'");
        if (!r->focus) {
            ++d.n_undefined;
            continue;
        }
        values.push_back(*r->focus);
        per_class[it->second->target_class].push_back(*r->focus);
    }
    if (values.empty()) throw data_error("empty distribution: no mosaic has a defined focus");

    d.n_defined = values.size();
    const auto overall = mean_std(values);
    d.mean = overall.mean;
    d.std = overall.std;

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    d.min = sorted.front();
    d.max = sorted.back();
    d.q1 = quantile_sorted(sorted, 0.25);
    d.median = quantile_sorted(sorted, 0.5);
    d.q3 = quantile_sorted(sorted, 0.75);

    d.histogram.assign(kHistogramBins, 0);
    for (double v : values) {
        auto bin = static_cast<std::size_t>(std::clamp(v, 0.0, 1.0) * kHistogramBins);
        d.histogram[std::min(bin, kHistogramBins - 1)] += 1;
    }

    double class_sum = 0.0;
    for (const auto& [cls, v] : per_class) {
        d.per_class[cls] = mean_std(v);
        class_sum += d.per_class[cls].mean;
    }
    d.class_balanced_mean = class_sum / static_cast<double>(per_class.size());
    return d;
}

nlohmann::json FocusDistribution::to_json() const {
    nlohmann::json classes = nlohmann::json::object();
    for (const auto& [cls, s] : per_class) classes[cls] = {{"n", s.n}, {"mean", s.mean}, {"std", s.std}};
    return {{"label", label},
            {"n_defined", n_defined},
            {"n_undefined", n_undefined},
            {"mean", mean},
            {"std", std},
            {"min", min},
            {"q1", q1},
            {"median", median},
            {"q3", q3},
            {"max", max},
            {"histogram", {{"bins", kHistogramBins}, {"range", {0.0, 1.0}}, {"counts", histogram}}},
            {"per_class", std::move(classes)},
            {"class_balanced_mean", class_balanced_mean}};
}

std::string results_csv(std::span<const FocusResult> results) {
    std::ostringstream out;
    out << "mosaic_id,target_class,focus,undefined,r_TL,r_TR,r_BL,r_BR\n";
    char buf[64];
    for (const auto* r : sorted_by_id(results)) {
        out << csv_escape(r->mosaic_id) << ',' << csv_escape(r->target_class) << ',';
        if (r->focus) {
            std::snprintf(buf, sizeof buf, "%.10f", *r->focus);
            out << buf << ",0";
        } else {
            out << ",1";
        }
        for (double q : r->quadrant_relevance) {
            std::snprintf(buf, sizeof buf, "%.10g", q);
            out << ',' << buf;
        }
        out << '\n';
    }
    return out.str();
}

KdeCurve kde_curve(std::span<const double> values) {
    if (values.size() < 2) throw data_error("kde needs at least 2 values; use the histogram only");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back())
        throw data_error("degenerate sample (all values equal); use the histogram only");

    const double n = static_cast<double>(sorted.size());
    double mean = 0.0;
    for (double v : sorted) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : sorted) ss += (v - mean) * (v - mean);
    const double sigma = std::sqrt(ss / (n - 1.0));
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    const double spread = iqr > 0.0 ? std::min(sigma, iqr / 1.34) : sigma;

    KdeCurve curve;
    curve.bandwidth = 0.9 * spread * std::pow(n, -0.2);
    const double h = curve.bandwidth;
    const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
    auto kernel = [h](double u) { return std::exp(-0.5 * (u / h) * (u / h)); };

    curve.x.resize(kKdePoints);
    curve.density.resize(kKdePoints);
    for (std::size_t i = 0; i < kKdePoints; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(kKdePoints - 1);
        double acc = 0.0;
        for (double v : sorted) acc += kernel(x - v) + kernel(x + v) + kernel(x - (2.0 - v));
        curve.x[i] = x;
        curve.density[i] = acc * norm;
    }
    return curve;
}

}  // namespace focus
