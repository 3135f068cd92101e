#include "cli.hpp"

#include "focus/attribution_io.hpp"
#include "focus/bias.hpp"
#include "focus/dataset_index.hpp"
#include "focus/error.hpp"
#include "focus/explainer.hpp"
#include "focus/focus.hpp"
#include "focus/mosaic.hpp"
#include "focus/sanity.hpp"
#include "focus/util.hpp"

#include <CLI11.hpp>
#include "json.hpp"
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifndef FOCUS_BENCH_VERSION
#define FOCUS_BENCH_VERSION "dev"
#endif

namespace fs = std::filesystem;

namespace focus::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitExplainer = 3;

void write_runconfig(const fs::path& dir, const std::string& command, nlohmann::json config) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw data_error("cannot create " + dir.string() + ": " + ec.message());
    const nlohmann::json j = {
        {"tool", "focus_bench"}, {"version", FOCUS_BENCH_VERSION}, {"command", command}, {"config", std::move(config)}};
    write_file_atomic(dir / "runconfig.json", j.dump(2) + "\n");
}

// Explainer selection shared by `explain` and `layout-study`.
struct ExplainerOptions {
    std::string synthetic;
    std::string command;
    double timeout_s = 3600.0;
    std::vector<std::string> env;
    std::uint64_t seed = 0;
    std::vector<double> blob{0.5, 0.5, 0.15};

    void add_to(CLI::App& app, bool with_seed) {
        auto* syn = app.add_option("--synthetic", synthetic,
                                   "Built-in explainer: uniform | iid-uniform-random | target-perfect | anti-target | "
                                   "gaussian-blob");
        auto* cmd = app.add_option("--cmd", command, "External explainer command (executable and fixed arguments)");
        syn->excludes(cmd);
        app.add_option("--timeout", timeout_s, "Explainer timeout in seconds")->check(CLI::PositiveNumber);
        app.add_option("--env", env, "Environment variable passed to the explainer (repeatable; default: all)");
        if (with_seed) app.add_option("--seed", seed, "Seed for random synthetic explainers");
        app.add_option("--blob", blob, "gaussian-blob center x, center y, sigma (fractions)")->expected(3);
    }

    void require_one() const {
        if (synthetic.empty() == command.empty()) throw usage_error("give exactly one of --synthetic or --cmd");
    }

    SyntheticExplainer synthetic_explainer() const {
        SyntheticExplainer e;
        e.kind = parse_synthetic_kind(synthetic);
        e.seed = seed;
        e.center_x = blob.at(0);
        e.center_y = blob.at(1);
        e.sigma = blob.at(2);
        return e;
    }

    ExplainerInvocation invocation() const {
        ExplainerInvocation inv;
        inv.command = split_command(command);
        inv.timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));
        inv.env_passthrough = env;
        return inv;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        if (!synthetic.empty()) {
            j = {{"synthetic", synthetic}, {"seed", seed}};
            if (synthetic == "gaussian-blob") j["blob"] = blob;
        } else {
            j = {{"cmd", command}, {"timeout_s", timeout_s}, {"env", env}};
        }
        return j;
    }

    // Produces attributions; returns the validation report.
    ValidationReport produce(const fs::path& manifest_json, const fs::path& out_dir, unsigned jobs) const {
        if (!synthetic.empty()) {
            generate_synthetic(load_manifest(manifest_json), synthetic_explainer(), out_dir, jobs);
            return validate_run(load_manifest(manifest_json), out_dir, jobs);
        }
        auto run = run_explainer(invocation(), manifest_json, out_dir, jobs);
        return run.report;
    }
};

DatasetIndex index_from(const std::string& index_path, const std::string& root, const std::string& split,
                        unsigned jobs) {
    if (!index_path.empty()) return load_index(index_path);
    if (root.empty()) throw usage_error("give --index or --root");
    return build_index(root, parse_split_rule(split), jobs);
}

struct PlanArgs {
    std::size_t per_class = 100;
    std::string mode = "standard";
    int width = 448;
    int height = 448;
    std::uint64_t seed = 0;
    std::vector<std::string> targets;

    void add_to(CLI::App& app) {
        app.add_option("--per-class", per_class, "Mosaics per target class")->check(CLI::PositiveNumber);
        app.add_option("--mode", mode, "standard | two-class")->check(CLI::IsMember({"standard", "two-class"}));
        app.add_option("--width", width, "Mosaic width (even)");
        app.add_option("--height", height, "Mosaic height (even)");
        app.add_option("--seed", seed, "Random seed");
        app.add_option("--target-class", targets, "Restrict target classes (repeatable)");
    }

    PlanOptions options() const {
        PlanOptions o;
        o.per_class = per_class;
        o.mode = parse_mode(mode);
        o.width = width;
        o.height = height;
        o.seed = seed;
        o.target_classes = targets;
        return o;
    }

    nlohmann::json to_json() const {
        return {{"per_class", per_class}, {"mode", mode},       {"width", width},
                {"height", height},       {"seed", seed},       {"target_classes", targets}};
    }
};

int synth_explainer_main(const std::string& manifest_path, const fs::path& out_dir, const std::string& field,
                         const SyntheticExplainer& explainer) {
    if (field != "target_class") {
        std::cerr << "unsupported --target-class-field '" << field << "'\n";
        return kExitUsage;
    }
    MosaicManifest manifest;
    try {
        manifest = load_manifest(manifest_path);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    try {
        fs::create_directories(out_dir);
        const std::size_t total = manifest.mosaics.size();
        for (std::size_t i = 0; i < total; ++i) {
            const auto& spec = manifest.mosaics[i].spec;
            write_map(synthesize_map(spec, explainer), out_dir / attribution_filename(spec.id));
            std::printf("PROGRESS %zu/%zu\n", i + 1, total);
        }
        std::fflush(stdout);
    } catch (const std::exception& e) {
        std::cerr << "inference failed: " << e.what() << "\n";
        return 3;
    }
    return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
    init_logging();
    CLI::App app{"focus_bench: mosaic-based Focus evaluation of feature-attribution methods"};
    app.set_version_flag("--version", FOCUS_BENCH_VERSION);
    app.require_subcommand(1);
    unsigned jobs = 0;
    app.add_option("--jobs,-j", jobs, "Worker threads (default: logical CPUs)");

    // index
    auto* index_cmd = app.add_subcommand("index", "Scan a dataset and write index.json");
    std::string idx_root, idx_csv, idx_split = "all-eval", idx_out;
    auto* root_opt = index_cmd->add_option("--root", idx_root, "Directory with one subdirectory per class");
    auto* csv_opt = index_cmd->add_option("--csv", idx_csv, "CSV manifest with header path,label,split");
    root_opt->excludes(csv_opt);
    index_cmd->add_option("--split", idx_split, "all-eval | subdirs | first-n:N | train-list:FILE");
    index_cmd->add_option("--out-dir", idx_out, "Output directory")->required();

    // mosaics
    auto* mosaics_cmd = app.add_subcommand("mosaics", "Plan and compose a mosaic set");
    std::string mos_index, mos_root, mos_split = "all-eval", mos_layout = "random", mos_out;
    PlanArgs mos_plan;
    mosaics_cmd->add_option("--index", mos_index, "index.json from `index`");
    mosaics_cmd->add_option("--root", mos_root, "Dataset root (indexed on the fly)");
    mosaics_cmd->add_option("--split", mos_split, "Split rule when using --root");
    mos_plan.add_to(*mosaics_cmd);
    mosaics_cmd->add_option("--layout", mos_layout, "random | top-row | bottom-row | left-col | right-col | main-diag | anti-diag");
    mosaics_cmd->add_option("--out-dir", mos_out, "Output directory")->required();

    // explain
    auto* explain_cmd = app.add_subcommand("explain", "Produce attribution maps for a mosaic set");
    std::string exp_manifest, exp_out;
    ExplainerOptions exp_opts;
    explain_cmd->add_option("--manifest", exp_manifest, "manifest.json")->required();
    explain_cmd->add_option("--out-dir", exp_out, "Directory for .foc1 files")->required();
    exp_opts.add_to(*explain_cmd, true);

    // synth-explainer: the protocol side of the built-in explainers
    auto* synth_cmd = app.add_subcommand("synth-explainer", "Built-in explainer speaking the subprocess protocol");
    std::string syn_manifest, syn_out, syn_field = "target_class", syn_kind = "uniform";
    std::uint64_t syn_seed = 0;
    std::vector<double> syn_blob{0.5, 0.5, 0.15};
    synth_cmd->add_option("--manifest", syn_manifest, "manifest.json")->required();
    synth_cmd->add_option("--output-dir", syn_out, "Directory for .foc1 files")->required();
    synth_cmd->add_option("--target-class-field", syn_field, "Manifest field naming the target class");
    synth_cmd->add_option("--kind", syn_kind, "Synthetic explainer kind");
    synth_cmd->add_option("--seed", syn_seed, "Seed for random kinds");
    synth_cmd->add_option("--blob", syn_blob, "gaussian-blob center x, center y, sigma (fractions)")->expected(3);

    // focus
    auto* focus_cmd = app.add_subcommand("focus", "Score an attribution run");
    std::string foc_manifest, foc_attr, foc_out, foc_label;
    focus_cmd->add_option("--manifest", foc_manifest, "manifest.json")->required();
    focus_cmd->add_option("--attributions", foc_attr, "Directory with .foc1 files")->required();
    focus_cmd->add_option("--out-dir", foc_out, "Output directory")->required();
    focus_cmd->add_option("--label", foc_label, "Run label");

    // compare
    auto* compare_cmd = app.add_subcommand("compare", "Compare two attribution runs over one mosaic set");
    std::string cmp_manifest, cmp_manifest_b, cmp_attr_a, cmp_attr_b, cmp_label_a = "a", cmp_label_b = "b", cmp_out;
    compare_cmd->add_option("--manifest", cmp_manifest, "manifest.json of run a (and b unless --manifest-b)")->required();
    compare_cmd->add_option("--manifest-b", cmp_manifest_b, "manifest.json of run b");
    compare_cmd->add_option("--attributions-a", cmp_attr_a, "Directory with the .foc1 files of run a")->required();
    compare_cmd->add_option("--attributions-b", cmp_attr_b, "Directory with the .foc1 files of run b")->required();
    compare_cmd->add_option("--label-a", cmp_label_a, "Label of run a");
    compare_cmd->add_option("--label-b", cmp_label_b, "Label of run b");
    compare_cmd->add_option("--out-dir", cmp_out, "Output directory")->required();

    // layout-study
    auto* layout_cmd = app.add_subcommand("layout-study", "Focus under each fixed layout and the random layout");
    std::string lay_index, lay_root, lay_split = "all-eval", lay_out;
    PlanArgs lay_plan;
    ExplainerOptions lay_opts;
    layout_cmd->add_option("--index", lay_index, "index.json from `index`");
    layout_cmd->add_option("--root", lay_root, "Dataset root (indexed on the fly)");
    layout_cmd->add_option("--split", lay_split, "Split rule when using --root");
    lay_plan.add_to(*layout_cmd);
    // One --seed drives both mosaic planning and random synthetic explainers.
    lay_opts.add_to(*layout_cmd, false);
    layout_cmd->add_option("--out-dir", lay_out, "Output directory")->required();

    // bias
    auto* bias_cmd = app.add_subcommand("bias", "Rank class pairs on a two-class run and write a review bundle");
    std::string bias_manifest, bias_attr, bias_out;
    BiasReportOptions bias_opts;
    bias_cmd->add_option("--manifest", bias_manifest, "manifest.json of a two-class mosaic set")->required();
    bias_cmd->add_option("--attributions", bias_attr, "Directory with .foc1 files")->required();
    bias_cmd->add_option("--out-dir", bias_out, "Output directory")->required();
    bias_cmd->add_option("--top-pairs", bias_opts.top_pairs, "Lowest-mean pairs to review");
    bias_cmd->add_option("--exemplars", bias_opts.exemplars, "Lowest and highest mosaics per pair");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*index_cmd) {
            if (idx_root.empty() == idx_csv.empty()) throw usage_error("give exactly one of --root or --csv");
            const auto index = idx_csv.empty() ? build_index(idx_root, parse_split_rule(idx_split), jobs)
                                               : build_index_from_csv(idx_csv, jobs);
            write_runconfig(idx_out, "index",
                            {{"root", idx_root}, {"csv", idx_csv}, {"split", idx_csv.empty() ? idx_split : "csv"}});
            write_file_atomic(fs::path(idx_out) / "index.json", index.serialize());
            std::cout << "indexed " << index.records().size() << " images in " << index.classes().size()
                      << " classes (" << index.train_count() << " train, " << index.summary().skipped.size()
                      << " skipped)\n";
        } else if (*mosaics_cmd) {
            auto options = mos_plan.options();
            options.layout = mos_layout == "random" ? LayoutPolicy{} : LayoutPolicy{parse_layout(mos_layout)};
            const auto index = index_from(mos_index, mos_root, mos_split, jobs);
            auto config = mos_plan.to_json();
            config["layout"] = mos_layout;
            config["index"] = mos_index;
            config["root"] = mos_root;
            config["split"] = mos_split;
            const auto specs = plan_mosaics(index, options);
            write_runconfig(mos_out, "mosaics", config);
            emit_mosaic_set(specs, index, mos_out, options.seed, jobs);
            std::cout << "wrote " << specs.size() << " mosaics to " << mos_out << "\n";
        } else if (*explain_cmd) {
            exp_opts.require_one();
            if (!exp_opts.synthetic.empty()) parse_synthetic_kind(exp_opts.synthetic);
            auto config = exp_opts.to_json();
            config["manifest"] = exp_manifest;
            write_runconfig(exp_out, "explain", config);
            const auto report = exp_opts.produce(exp_manifest, exp_out, jobs);
            if (!report.complete()) {
                std::cerr << "attribution run is incomplete:\n" << report.describe_problems();
                return kExitExplainer;
            }
            std::cout << "complete run: " << report.entries.size() << " maps in " << exp_out << "\n";
        } else if (*synth_cmd) {
            SyntheticExplainer e;
            try {
                e.kind = parse_synthetic_kind(syn_kind);
            } catch (const Error& err) {
                std::cerr << err.what() << "\n";
                return kExitUsage;
            }
            e.seed = syn_seed;
            e.center_x = syn_blob.at(0);
            e.center_y = syn_blob.at(1);
            e.sigma = syn_blob.at(2);
            return synth_explainer_main(syn_manifest, syn_out, syn_field, e);
        } else if (*focus_cmd) {
            const auto manifest = load_manifest(foc_manifest);
            const auto results = score_run(manifest, foc_attr, jobs);
            const auto specs = manifest.specs();
            const auto dist = aggregate(results, specs, foc_label);
            write_runconfig(foc_out, "focus", {{"manifest", foc_manifest}, {"attributions", foc_attr}, {"label", foc_label}});
            write_file_atomic(fs::path(foc_out) / "focus_results.csv", results_csv(results));
            write_file_atomic(fs::path(foc_out) / "distribution.json", dist.to_json().dump(2) + "\n");
            try {
                const auto values = defined_values(results);
                const auto kde = kde_curve(values);
                std::string csv = "x,density\n";
                for (std::size_t i = 0; i < kde.x.size(); ++i)
                    csv += format_double(kde.x[i], 6) + "," + format_double(kde.density[i], 8) + "\n";
                write_file_atomic(fs::path(foc_out) / "kde.csv", csv);
            } catch (const Error& e) {
                spdlog::info("no density curve: {}", e.what());
            }
            std::cout << "focus: n=" << dist.n_defined << " undefined=" << dist.n_undefined
                      << " mean=" << format_double(dist.mean) << " std=" << format_double(dist.std)
                      << " class_balanced_mean=" << format_double(dist.class_balanced_mean) << "\n";
        } else if (*compare_cmd) {
            const auto a = load_scored_run(cmp_manifest, cmp_attr_a, cmp_label_a, jobs);
            const auto b =
                load_scored_run(cmp_manifest_b.empty() ? cmp_manifest : cmp_manifest_b, cmp_attr_b, cmp_label_b, jobs);
            const auto report = compare_runs(a, b);
            write_runconfig(cmp_out, "compare",
                            {{"manifest", cmp_manifest}, {"manifest_b", cmp_manifest_b}, {"attributions_a", cmp_attr_a},
                             {"attributions_b", cmp_attr_b}, {"label_a", cmp_label_a}, {"label_b", cmp_label_b}});
            write_file_atomic(fs::path(cmp_out) / "comparison.json", report.to_json().dump(2) + "\n");
            std::cout << "mean_difference=" << format_double(report.mean_difference)
                      << " ks=" << format_double(report.ks) << "\n";
        } else if (*layout_cmd) {
            lay_opts.require_one();
            lay_opts.seed = lay_plan.seed;
            const auto index = index_from(lay_index, lay_root, lay_split, jobs);
            auto config = lay_plan.to_json();
            config["explainer"] = lay_opts.to_json();
            config["index"] = lay_index;
            config["root"] = lay_root;
            config["split"] = lay_split;
            write_runconfig(lay_out, "layout-study", config);
            const auto rows = run_layout_study(
                index, lay_plan.options(), lay_out,
                [&](const fs::path& manifest, const fs::path& out) {
                    const auto report = lay_opts.produce(manifest, out, jobs);
                    if (!report.complete()) {
                        throw Error(ErrorKind::explainer,
                                    "attribution run " + out.string() + " is incomplete:\n" + report.describe_problems());
                    }
                },
                jobs);
            std::cout << layout_table_csv(rows);
        } else if (*bias_cmd) {
            const auto manifest = load_manifest(bias_manifest);
            const auto results = score_run(manifest, bias_attr, jobs);
            auto ranked = rank_pairs(results, manifest.specs(), bias_opts.exemplars);
            const fs::path out = fs::path(bias_out) / "bias_report";
            write_runconfig(bias_out, "bias",
                            {{"manifest", bias_manifest}, {"attributions", bias_attr},
                             {"top_pairs", bias_opts.top_pairs}, {"exemplars", bias_opts.exemplars}});
            const auto bundle = bias_report(ranked, manifest, bias_attr, bias_opts, out, jobs);
            std::cout << "ranked " << ranked.size() << " pairs; wrote " << bundle.overlays << " overlays to "
                      << out.string() << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}

}  // namespace focus::cli
