#include "doctest.h"

#include "focus/bias.hpp"
#include "focus/error.hpp"
#include "focus/focus.hpp"
#include "focus/image.hpp"
#include "focus/sanity.hpp"
#include "focus/util.hpp"
#include "support.hpp"

#include <opencv2/imgproc.hpp>
#include <opencv2/imgcodecs.hpp>

#include <random>

using namespace focus;

namespace {

MosaicSpec pair_spec(const std::string& id, const std::string& target, const std::string& outer) {
    auto s = test::make_spec(Layout::top_row, 4, 4, id, MosaicMode::two_class);
    s.target_class = target;
    for (auto& q : s.quadrants) q.class_label = q.class_label == "t" ? target : outer;
    return s;
}

FocusResult scored(const MosaicSpec& s, std::optional<double> f) {
    FocusResult r;
    r.mosaic_id = s.id;
    r.target_class = s.target_class;
    r.focus = f;
    return r;
}

// Expected blend for normalized relevance v over gray level g, as BGR.
cv::Vec3b expected_pixel(double v, int g) {
    double r, gr, b;
    if (v <= 0.5) {
        const double t = v / 0.5;
        r = 255 * t, gr = 255 * t, b = 255 * (1 - t);
    } else {
        const double t = (v - 0.5) / 0.5;
        r = 255, gr = 255 * (1 - t), b = 0;
    }
    auto mix = [&](double c) { return static_cast<uchar>(std::lround(0.5 * g + 0.5 * c)); };
    return {mix(b), mix(gr), mix(r)};
}

}  // namespace

TEST_CASE("rank_pairs orders by mean focus") {
    const std::vector<MosaicSpec> specs{pair_spec("ab1", "A", "B"), pair_spec("ab2", "A", "B"),
                                        pair_spec("ac1", "A", "C")};
    const std::vector<FocusResult> rs{scored(specs[0], 0.9), scored(specs[1], 0.7), scored(specs[2], 0.4)};
    const auto ranked = rank_pairs(rs, specs);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].pair_name() == "A vs C");
    CHECK(ranked[0].mean_focus == doctest::Approx(0.4));
    CHECK(ranked[1].pair_name() == "A vs B");
    CHECK(ranked[1].mean_focus == doctest::Approx(0.8));
    CHECK(ranked[1].std_focus == doctest::Approx(0.1));
    CHECK(ranked[1].lowest.front().mosaic_id == "ab2");
    CHECK(ranked[1].highest.front().mosaic_id == "ab1");

    const std::vector<MosaicSpec> one{specs[2]};
    CHECK(rank_pairs(std::vector<FocusResult>{rs[2]}, one).size() == 1);
}

TEST_CASE("rank_pairs is deterministic under shuffling and ties use the pair name") {
    std::vector<MosaicSpec> specs;
    std::vector<FocusResult> rs;
    // "A B vs C" sorts before "A vs B" even though target "A" < "A B".
    for (auto [t, o] : {std::pair{"A", "B"}, std::pair{"A B", "C"}, std::pair{"B", "A"}}) {
        for (int i = 0; i < 3; ++i) {
            specs.push_back(pair_spec(std::string(t) + o + std::to_string(i), t, o));
            rs.push_back(scored(specs.back(), 0.25 * (i + 1)));
        }
    }
    const auto ranked = rank_pairs(rs, specs, 2);
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0].pair_name() == "A B vs C");
    CHECK(ranked[1].pair_name() == "A vs B");
    CHECK(ranked[2].pair_name() == "B vs A");

    std::mt19937 g(1);
    std::shuffle(rs.begin(), rs.end(), g);
    const auto again = rank_pairs(rs, specs, 2);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        CHECK(again[i].pair_name() == ranked[i].pair_name());
        CHECK(again[i].lowest.size() == 2);
        for (std::size_t k = 0; k < 2; ++k) CHECK(again[i].lowest[k].mosaic_id == ranked[i].lowest[k].mosaic_id);
        CHECK(again[i].lowest.front().focus <= again[i].mean_focus);
        CHECK(again[i].mean_focus <= again[i].highest.front().focus);
    }
}

TEST_CASE("rank_pairs rejects standard mosaics and skips empty pairs") {
    auto standard = pair_spec("s", "A", "B");
    standard.mode = MosaicMode::standard;
    CHECK_THROWS_AS(rank_pairs(std::vector<FocusResult>{scored(standard, 0.5)}, std::vector<MosaicSpec>{standard}),
                    Error);

    const std::vector<MosaicSpec> specs{pair_spec("x", "A", "B"), pair_spec("y", "B", "A")};
    const auto ranked = rank_pairs(std::vector<FocusResult>{scored(specs[0], std::nullopt), scored(specs[1], 0.3)}, specs);
    REQUIRE(ranked.size() == 1);
    CHECK(ranked[0].target_class == "B");
}

TEST_CASE("known exemplars surface at the right extreme") {
    std::vector<MosaicSpec> specs;
    std::vector<FocusResult> rs;
    const std::vector<double> values{0.8176, 0.62, 0.66, 0.70, 0.4940, 0.58, 0.75, 0.61, 0.69, 0.72, 0.64, 0.60};
    for (std::size_t i = 0; i < values.size(); ++i) {
        specs.push_back(pair_spec("Peacock_" + std::to_string(i), "Peacock", "Common iguana"));
        rs.push_back(scored(specs.back(), values[i]));
    }
    const auto ranked = rank_pairs(rs, specs, 5);
    REQUIRE(ranked.size() == 1);
    CHECK(ranked[0].highest.front().focus == 0.8176);
    CHECK(ranked[0].lowest.front().focus == 0.4940);
    CHECK(ranked[0].lowest.size() == 5);
    CHECK(ranked[0].highest.size() == 5);
    for (std::size_t i = 1; i < 5; ++i) {
        CHECK(ranked[0].lowest[i - 1].focus <= ranked[0].lowest[i].focus);
        CHECK(ranked[0].highest[i - 1].focus >= ranked[0].highest[i].focus);
    }
}

TEST_CASE("overlay rendering") {
    cv::Mat base(4, 6, CV_8UC3, cv::Scalar(30, 90, 150));
    cv::Mat gray;
    cv::cvtColor(base, gray, cv::COLOR_BGR2GRAY);
    const int g = gray.at<uchar>(0, 0);

    SUBCASE("zero map gives the flagged grayscale mosaic") {
        AttributionMap zero{"m", 6, 4, std::vector<float>(24, 0.0f)};
        zero.values[3] = -2.0f;
        const auto o = render_overlay(base, zero);
        CHECK(o.no_relevance);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 6; ++x) CHECK(o.image.at<cv::Vec3b>(y, x) == cv::Vec3b(g, g, g));
    }
    SUBCASE("single hot pixel is the only red one") {
        AttributionMap hot{"m", 6, 4, std::vector<float>(24, 0.0f)};
        hot.at(2, 1) = 7.5f;
        hot.at(4, 3) = -3.0f;
        const auto o = render_overlay(base, hot);
        CHECK_FALSE(o.no_relevance);
        int red = 0;
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 6; ++x) {
                const auto px = o.image.at<cv::Vec3b>(y, x);
                const bool is_hot = x == 2 && y == 1;
                CHECK(px == expected_pixel(is_hot ? 1.0 : 0.0, g));
                red += px[2] > px[0];
            }
        }
        CHECK(red == 1);
    }
    SUBCASE("uniform map gives a uniform tint") {
        const auto o = render_overlay(base, AttributionMap{"m", 6, 4, std::vector<float>(24, 0.3f)});
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 6; ++x) CHECK(o.image.at<cv::Vec3b>(y, x) == expected_pixel(1.0, g));
    }
    SUBCASE("mid value maps to yellow") {
        AttributionMap m{"m", 6, 4, std::vector<float>(24, 1.0f)};
        m.at(0, 0) = 2.0f;
        CHECK(render_overlay(base, m).image.at<cv::Vec3b>(1, 1) == expected_pixel(0.5, g));
    }
    CHECK_THROWS_AS(render_overlay(base, AttributionMap{"m", 4, 4, std::vector<float>(16, 1.0f)}), Error);
}

TEST_CASE("overlay PNG carries the relevance flag") {
    test::TempDir dir;
    cv::Mat base(4, 4, CV_8UC3, cv::Scalar(1, 2, 3));
    write_overlay(dir / "none.png", render_overlay(base, AttributionMap{"m", 4, 4, std::vector<float>(16, 0.0f)}));
    write_overlay(dir / "norm.png", render_overlay(base, AttributionMap{"m", 4, 4, std::vector<float>(16, 1.0f)}));
    CHECK(png_text(read_file(dir / "none.png"), "focus-bench:relevance") == "none");
    CHECK(png_text(read_file(dir / "norm.png"), "focus-bench:relevance") == "normalized");
    // The chunk must not break ordinary decoders.
    CHECK(cv::imread((dir / "norm.png").string()).cols == 4);
}

TEST_CASE("bias report bundle") {
    test::TempDir dir;
    test::make_dataset(dir / "data", {"A", "B", "C"}, 4, 8);
    const auto index = build_index(dir / "data", split_rule::AllEval{}, 1);
    PlanOptions opt;
    opt.per_class = 24;
    opt.width = 16;
    opt.height = 16;
    opt.mode = MosaicMode::two_class;
    opt.seed = 8;
    const auto manifest = emit_mosaic_set(plan_mosaics(index, opt), index, dir / "mosaics", opt.seed, 2);
    generate_synthetic(manifest, {SyntheticKind::iid_uniform_random, 4}, dir / "attr", 2);
    const auto results = score_run(manifest, dir / "attr", 2);
    const auto specs = manifest.specs();

    auto ranked = rank_pairs(results, specs, 3);
    REQUIRE(ranked.size() == 6);
    const auto bundle = bias_report(ranked, manifest, dir / "attr", {5, 3}, dir / "report", 2);
    CHECK(bundle.overlays == 5 * 6);
    CHECK(bundle.warnings.empty());

    std::size_t pngs = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "report"))
        pngs += e.path().extension() == ".png";
    CHECK(pngs == bundle.files);
    for (std::size_t p = 0; p < 5; ++p) {
        for (const auto& e : ranked[p].lowest) CHECK(std::filesystem::exists(dir / "report" / e.overlay));
        CHECK(ranked[p].lowest.front().overlay.string().find("__vs__") != std::string::npos);
    }

    const auto pairs = read_file(dir / "report/pairs.csv");
    CHECK(pairs.starts_with("target,outer,n,mean,std\n"));
    const auto findings = read_file(dir / "report/findings.csv");
    CHECK(findings.starts_with("pair,mosaic_id,bias_type,note\n"));
    CHECK(std::count(findings.begin(), findings.end(), '\n') == 1 + 30);
    const auto summary = read_file(dir / "report/summary.md");
    CHECK(summary.find("`shared`") != std::string::npos);
    CHECK(summary.find("`missing`") != std::string::npos);
    CHECK(summary.find(ranked[0].pair_name().substr(0, 1)) != std::string::npos);
}

TEST_CASE("bias report clamps oversized requests with warnings") {
    test::TempDir dir;
    test::make_dataset(dir / "data", {"A", "B"}, 3, 8);
    const auto index = build_index(dir / "data", split_rule::AllEval{}, 1);
    PlanOptions opt;
    opt.per_class = 2;
    opt.width = 8;
    opt.height = 8;
    opt.mode = MosaicMode::two_class;
    const auto manifest = emit_mosaic_set(plan_mosaics(index, opt), index, dir / "mosaics", 0, 1);
    generate_synthetic(manifest, {SyntheticKind::gaussian_blob}, dir / "attr", 1);
    auto ranked = rank_pairs(score_run(manifest, dir / "attr", 1), manifest.specs(), 3);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].lowest.size() == 2);
    const auto bundle = bias_report(ranked, manifest, dir / "attr", {10, 3}, dir / "report", 1);
    CHECK(bundle.warnings.size() == 3);
    CHECK(bundle.overlays == 2 * 2 * 2);
    // Both extremes of a two-mosaic pair are the same two mosaics.
    CHECK(bundle.files == 4);
}
