// Acceptance suite: one PASS/FAIL line per primary criterion.

#include "focus/attribution_io.hpp"
#include "focus/dataset_index.hpp"
#include "focus/focus.hpp"
#include "focus/mosaic.hpp"
#include "focus/rng.hpp"
#include "focus/sanity.hpp"
#include "focus/util.hpp"
#include "support.hpp"

#include <array>
#include <atomic>
#include <bit>
#include <cstring>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

using namespace focus;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void criterion(const std::string& name, double time_limit_s, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (time_limit_s > 0 && secs > time_limit_s) {
        out.pass = false;
        out.detail += "; over the " + format_double(time_limit_s, 0) + " s budget";
    }
    if (!out.pass) ++failures;
    std::printf("%s  %s: %s [%.2f s]\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str(), secs);
    std::fflush(stdout);
}

// Per-pixel reference for the oracle criterion: no quadrant decomposition.
std::optional<double> brute_force_focus(std::span<const float> v, int w, int h, const MosaicSpec& spec) {
    double target = 0.0, total = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int q = (y < h / 2 ? 0 : 2) + (x < w / 2 ? 0 : 1);
            const double p = std::max(0.0, static_cast<double>(v[static_cast<std::size_t>(y) * w + x]));
            total += p;
            if (spec.quadrants[static_cast<std::size_t>(q)].class_label == spec.target_class) target += p;
        }
    }
    if (total == 0.0) return std::nullopt;
    return target / total;
}

// Survival function of chi-square with 5 degrees of freedom (closed form for odd dof).
double chi2_5_sf(double x) {
    const double s = std::sqrt(x);
    return std::erfc(s / std::sqrt(2.0)) + std::sqrt(2.0 * x / std::numbers::pi) * std::exp(-x / 2.0) * (1.0 + x / 3.0);
}

Layout complement(Layout l) {
    switch (l) {
        case Layout::top_row: return Layout::bottom_row;
        case Layout::bottom_row: return Layout::top_row;
        case Layout::left_col: return Layout::right_col;
        case Layout::right_col: return Layout::left_col;
        case Layout::main_diag: return Layout::anti_diag;
        case Layout::anti_diag: return Layout::main_diag;
    }
    return l;
}

// Toy dataset of 10 classes x 100 tiny images, first 20 of each class train.
struct ToyDataset {
    test::TempDir dir;
    DatasetIndex index;
    ToyDataset() {
        test::make_dataset(dir / "data", test::class_names(10), 100, 8);
        index = build_index(dir / "data", parse_split_rule("first-n:20"));
    }
};

Outcome uniform_exactness(const ToyDataset& toy) {
    std::size_t mosaics = 0, off = 0;
    double worst = 0.0, worst_std = 0.0;
    // Disk path at one geometry, in-memory at several others.
    const std::vector<std::pair<int, int>> geometries{{64, 48}, {2, 2}, {448, 448}, {6, 10}, {1000, 2}};
    for (const auto& [w, h] : geometries) {
        PlanOptions opt;
        opt.per_class = 21;
        opt.width = w;
        opt.height = h;
        opt.seed = 1;
        const auto specs = plan_mosaics(toy.index, opt);
        std::vector<FocusResult> results;
        if (w == 64) {
            test::TempDir run;
            const auto manifest = make_manifest(specs, toy.index, opt.seed);
            generate_synthetic(manifest, {SyntheticKind::uniform}, run.path());
            results = score_run(manifest, run.path());
        } else {
            results.resize(specs.size());
            parallel_for(specs.size(), 0, [&](std::size_t i) {
                results[i] = compute_focus(synthesize_map(specs[i], {SyntheticKind::uniform}), specs[i]);
            });
        }
        for (const auto& r : results) {
            const double d = r.focus ? std::abs(*r.focus - 0.5) : 1.0;
            worst = std::max(worst, d);
            off += d > 1e-9;
        }
        worst_std = std::max(worst_std, aggregate(results, specs).std);
        mosaics += results.size();
    }
    return {off == 0 && worst_std == 0.0 && mosaics >= 200,
            std::to_string(mosaics) + " mosaics over " + std::to_string(geometries.size()) +
                " geometries, max |F-0.5| = " + sci(worst) + ", max std = " + sci(worst_std)};
}

Outcome random_baseline(const ToyDataset& toy) {
    PlanOptions opt;
    opt.per_class = 100;
    opt.seed = 2;
    const auto specs = plan_mosaics(toy.index, opt);
    test::TempDir run;
    std::vector<FocusResult> results(specs.size());
    // Each map goes through the file format and is deleted after scoring.
    parallel_for(specs.size(), 0, [&](std::size_t i) {
        const auto path = run.path() / attribution_filename(specs[i].id);
        write_map(synthesize_map(specs[i], {SyntheticKind::iid_uniform_random, 2}), path);
        results[i] = compute_focus(read_map(path), specs[i]);
        fs::remove(path);
    });
    const auto d = aggregate(results, specs);
    const bool geometry = specs.front().width == 448 && specs.front().height == 448;
    return {specs.size() == 1000 && geometry && d.n_defined == 1000 && d.mean >= 0.49 && d.mean <= 0.51,
            std::to_string(d.n_defined) + " mosaics 448x448, mean " + format_double(d.mean, 6) + " (std " +
                format_double(d.std, 6) + ")"};
}

Outcome extremes(const ToyDataset& toy) {
    PlanOptions opt;
    opt.per_class = 24;
    opt.width = 32;
    opt.height = 32;
    opt.seed = 3;
    const auto manifest = make_manifest(plan_mosaics(toy.index, opt), toy.index, opt.seed);
    test::TempDir run;
    generate_synthetic(manifest, {SyntheticKind::target_perfect}, run / "perfect");
    generate_synthetic(manifest, {SyntheticKind::anti_target}, run / "anti");
    std::size_t bad = 0;
    for (const auto& r : score_run(manifest, run / "perfect")) bad += !(r.focus && *r.focus == 1.0);
    for (const auto& r : score_run(manifest, run / "anti")) bad += !(r.focus && *r.focus == 0.0);
    return {bad == 0, std::to_string(manifest.mosaics.size()) + " mosaics per kind, " + std::to_string(bad) +
                          " not exactly 1.0 / 0.0"};
}

Outcome oracle_equivalence() {
    RandomStream rng(4, "oracle");
    double worst = 0.0;
    std::size_t mismatched = 0, undefined = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto spec = test::make_spec(kLayouts[rng.below(kLayouts.size())], 8, 8, "m" + std::to_string(i));
        std::vector<float> v(64);
        // Mixed signs, with some all-negative maps to hit the undefined branch.
        const float shift = rng.below(50) == 0 ? 2.0f : 0.5f;
        for (auto& x : v) x = (rng.unit_float() - shift) * 10.0f;
        const auto got = compute_focus(AttributionMap{spec.id, 8, 8, v}, spec);
        const auto want = brute_force_focus(v, 8, 8, spec);
        if (got.defined() != want.has_value()) {
            ++mismatched;
            continue;
        }
        if (!want) {
            ++undefined;
            continue;
        }
        const double d = std::abs(*got.focus - *want);
        worst = std::max(worst, d);
        mismatched += d > 1e-6;
    }
    return {mismatched == 0, "1000 random 8x8 maps (" + std::to_string(undefined) + " undefined), max |diff| = " +
                                 sci(worst)};
}

Outcome metric_properties() {
    RandomStream rng(5, "properties");
    const int w = 64, h = 48;
    double scale_worst = 0.0, complement_worst = 0.0;
    std::size_t clamp_changed = 0;
    for (int i = 0; i < 200; ++i) {
        const auto layout = kLayouts[rng.below(6)];
        const auto spec = test::make_spec(layout, w, h);
        std::vector<double> base(static_cast<std::size_t>(w) * h);
        for (auto& x : base) x = rng.unit_float() < 0.3f ? 0.0 : static_cast<double>(rng.unit_float());

        // Scale invariance over an exactly scaled double grid.
        const auto f1 = *compute_focus<double>(base, w, h, spec).focus;
        for (double c : {1e-6, 1.0, 1e6}) {
            std::vector<double> scaled(base);
            for (auto& x : scaled) x *= c;
            scale_worst = std::max(scale_worst, std::abs(*compute_focus<double>(scaled, w, h, spec).focus - f1));
        }

        // Negative values injected where relevance was zero change nothing.
        std::vector<float> fmap(base.begin(), base.end());
        const auto before = compute_focus(AttributionMap{"m", w, h, fmap}, spec);
        for (auto& x : fmap) {
            if (x == 0.0f) x = -(rng.unit_float() * 1e3f + 1e-3f);
        }
        const auto after = compute_focus(AttributionMap{"m", w, h, fmap}, spec);
        clamp_changed += *before.focus != *after.focus || before.quadrant_relevance != after.quadrant_relevance;

        // Complement identity.
        const auto other = test::make_spec(complement(layout), w, h);
        complement_worst = std::max(complement_worst, std::abs(*before.focus +
                                                                *compute_focus(AttributionMap{"m", w, h, fmap}, other).focus -
                                                                1.0));
    }

    // The same property on stored float maps at the default geometry, where
    // scaling itself rounds every value.
    double float_scale_worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const auto spec = test::make_spec(kLayouts[rng.below(6)], 448, 448);
        AttributionMap m{"m", 448, 448, std::vector<float>(448 * 448)};
        for (auto& x : m.values) x = rng.unit_float();
        const double f = *compute_focus(m, spec).focus;
        for (double c : {1e-6, 1e6}) {
            auto scaled = m;
            for (auto& x : scaled.values) x = static_cast<float>(x * c);
            float_scale_worst = std::max(float_scale_worst, std::abs(*compute_focus(scaled, spec).focus - f));
        }
    }

    // Zero map: undefined, counted, and excluded from the statistics.
    std::vector<MosaicSpec> specs;
    std::vector<FocusResult> results;
    for (int i = 0; i < 4; ++i) {
        specs.push_back(test::make_spec(Layout::top_row, 4, 4, "z" + std::to_string(i)));
        std::vector<float> v(16, 0.0f);
        if (i < 3) v[0] = 1.0f;  // TL only: focus 1
        if (i == 1) v[15] = 1.0f;  // plus BR: focus 0.5
        results.push_back(compute_focus(AttributionMap{specs.back().id, 4, 4, v}, specs.back()));
    }
    const auto d = aggregate(results, specs);
    const bool zero_ok = !results[3].defined() && d.n_undefined == 1 && d.n_defined == 3 &&
                         std::abs(d.mean - 2.5 / 3.0) < 1e-15 && d.min == 0.5;

    const bool pass = scale_worst < 1e-9 && float_scale_worst < 1e-9 && clamp_changed == 0 && complement_worst < 1e-12 && zero_ok;
    return {pass, "scale max |dF| = " + sci(scale_worst) + " (float maps " + sci(float_scale_worst) + "), clamping changes = " +
                      std::to_string(clamp_changed) + ", complement max |F+F'-1| = " + sci(complement_worst) +
                      ", zero map " + (zero_ok ? "undefined and excluded" : "MISHANDLED")};
}

Outcome mosaic_construction(const ToyDataset& toy) {
    std::string problems;
    auto note = [&](const std::string& p) {
        if (problems.size() < 300) problems += (problems.empty() ? "" : "; ") + p;
    };
    std::array<std::size_t, 6> freq{};
    std::size_t total = 0;
    for (auto mode : {MosaicMode::standard, MosaicMode::two_class}) {
        PlanOptions opt;
        opt.per_class = 600;
        opt.mode = mode;
        opt.seed = 6;
        const auto specs = plan_mosaics(toy.index, opt);
        if (specs.size() != 6000) note("expected 6000 specs, got " + std::to_string(specs.size()));
        for (const auto& s : specs) {
            int targets = 0;
            std::vector<std::string> outer;
            for (Quadrant q : kQuadrants) {
                const auto& src = s.at(q);
                const auto& rec = toy.index.record(src.image_id);
                if (rec.split != Split::eval) note(s.id + " uses train image " + rec.id);
                if (rec.class_label != src.class_label) note(s.id + " mislabels " + rec.id);
                if (src.class_label == s.target_class) ++targets;
                else outer.push_back(src.class_label);
            }
            if (targets != 2 || outer.size() != 2) note(s.id + " has " + std::to_string(targets) + " target quadrants");
            if (mode == MosaicMode::two_class && outer.size() == 2 && outer[0] != outer[1])
                note(s.id + " has two outer classes");
            if (mode == MosaicMode::standard) {
                ++freq[static_cast<std::size_t>(s.layout)];
                ++total;
            }
        }
        // Determinism: same seed, byte-identical manifest.
        if (make_manifest(specs, toy.index, opt.seed).serialize() !=
            make_manifest(plan_mosaics(toy.index, opt), toy.index, opt.seed).serialize())
            note("manifest differs between identical runs");
    }

    // The written manifest.json is byte-identical too.
    PlanOptions small;
    small.per_class = 6;
    small.width = 16;
    small.height = 16;
    small.seed = 6;
    test::TempDir a, b;
    emit_mosaic_set(plan_mosaics(toy.index, small), toy.index, a.path(), small.seed);
    emit_mosaic_set(plan_mosaics(toy.index, small), toy.index, b.path(), small.seed, 1);
    if (read_file(a / "manifest.json") != read_file(b / "manifest.json")) note("emitted manifest.json differs");

    const double expected = static_cast<double>(total) / 6.0;
    double chi2 = 0.0;
    for (auto f : freq) chi2 += (f - expected) * (f - expected) / expected;
    const double p = chi2_5_sf(chi2);
    if (!(chi2 < 20.515 && p > 0.001)) note("layout frequencies fail uniformity");
    return {problems.empty(), "12000 mosaics (6000 random-layout standard + 6000 two-class), layout chi2 = " +
                                  format_double(chi2, 3) + " (p = " + format_double(p, 4) + ", critical 20.515)" +
                                  (problems.empty() ? "" : ", " + problems)};
}

Outcome format_round_trip() {
    RandomStream rng(7, "format");
    test::TempDir dir;
    std::size_t inexact = 0;
    for (int i = 0; i < 50; ++i) {
        const int w = 1 + static_cast<int>(rng.below(64)), h = 1 + static_cast<int>(rng.below(64));
        AttributionMap m{"m" + std::to_string(i), w, h, std::vector<float>(static_cast<std::size_t>(w) * h)};
        for (auto& v : m.values) {
            std::uint32_t bits;
            do {
                bits = static_cast<std::uint32_t>(rng.next());
            } while (!std::isfinite(std::bit_cast<float>(bits)));
            v = std::bit_cast<float>(bits);
        }
        const auto path = dir / attribution_filename(m.mosaic_id);
        write_map(m, path);
        const auto back = read_map(path);
        const auto bytes = read_file(path);
        inexact += back.width != w || back.height != h || back.mosaic_id != m.mosaic_id ||
                   std::memcmp(back.values.data(), m.values.data(), 4 * m.values.size()) != 0 ||
                   encode_foc1(back) != bytes;
    }

    const auto good = encode_foc1(AttributionMap{"", 7, 5, std::vector<float>(35, 0.25f)});
    std::size_t silent = 0;
    for (int i = 0; i < 10000; ++i) {
        auto bad = good;
        const auto pos = rng.below(kFoc1HeaderSize);
        const auto delta = 1 + rng.below(255);
        bad[pos] = static_cast<char>(static_cast<unsigned char>(bad[pos]) + delta);
        try {
            decode_foc1(bad);
            ++silent;
        } catch (const FormatError&) {
        }
    }
    return {inexact == 0 && silent == 0, "50 random maps bit-exact (" + std::to_string(inexact) +
                                             " mismatches), 10000 header mutations, " + std::to_string(silent) +
                                             " accepted"};
}

Outcome layout_study(const ToyDataset& toy) {
    test::TempDir out;
    PlanOptions opt;
    opt.per_class = 5;
    opt.width = 32;
    opt.height = 32;
    opt.seed = 8;
    const auto rows = run_layout_study(toy.index, opt, out.path(),
                                       [](const fs::path& manifest_json, const fs::path& dir) {
                                           generate_synthetic(load_manifest(manifest_json), {SyntheticKind::uniform}, dir);
                                       });
    bool ok = rows.size() == 7;
    std::string detail;
    for (const auto& r : rows) {
        ok = ok && r.distribution.mean == 0.5 && r.distribution.std == 0.0 && r.distribution.n_defined == 50;
        detail += (detail.empty() ? "" : ", ") + r.configuration + " " + format_double(r.distribution.mean, 3) + "/" +
                  format_double(r.distribution.std, 3);
    }
    ok = ok && fs::exists(out / "layout_table.csv");
    return {ok, std::to_string(rows.size()) + " configurations (mean/std): " + detail};
}

}  // namespace

int main() {
    init_logging();
    ToyDataset toy;
    criterion("uniform attribution exactness", 10, [&] { return uniform_exactness(toy); });
    criterion("random-baseline mean", 120, [&] { return random_baseline(toy); });
    criterion("extremes", 10, [&] { return extremes(toy); });
    criterion("oracle equivalence", 5, [] { return oracle_equivalence(); });
    criterion("metric properties", 0, [] { return metric_properties(); });
    criterion("mosaic construction", 60, [&] { return mosaic_construction(toy); });
    criterion("format round-trip", 0, [] { return format_round_trip(); });
    criterion("layout-study harness", 0, [&] { return layout_study(toy); });
    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
