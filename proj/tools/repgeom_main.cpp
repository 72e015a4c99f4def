// repgeom: geometry profiles of layer-wise hidden representations.
//
// Subcommands: id, overlap, select, knn-eval, synth, report. Every artifact path
// written is printed on stdout, one per line.

#include "repgeom/error.hpp"
#include "repgeom/id_twonn.hpp"
#include "repgeom/neighbors.hpp"
#include "repgeom/overlap.hpp"
#include "repgeom/profiles.hpp"
#include "repgeom/report_io.hpp"
#include "repgeom/synth.hpp"
#include "repgeom/tensor_store.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace repgeom;

namespace {

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

struct CommonInputs {
    std::string manifest;
    std::string labels;
    std::string levels;
    std::string out;
};

struct IdFlags {
    std::string method = "mle";
    std::size_t decimation = 4;
    std::size_t repetitions = 5;
    std::uint64_t seed = 0;
    double discard = 0.1;
};

void add_id_flags(CLI::App* cmd, IdFlags& f) {
    cmd->add_option("--method", f.method, "TwoNN estimator")->check(CLI::IsMember({"mle", "regression"}));
    cmd->add_option("--decimation", f.decimation, "Decimation factor")->check(CLI::PositiveNumber);
    cmd->add_option("--repetitions", f.repetitions, "Random subsets per estimate")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", f.seed, "Root seed");
    cmd->add_option("--discard", f.discard, "Regression: fraction of largest ratios discarded")
        ->check(CLI::Range(0.0, 0.999999));
}

IdConfig to_id_config(const IdFlags& f, unsigned workers) {
    IdConfig c;
    c.method = parse_id_method(f.method);
    c.decimation_factor = f.decimation;
    c.repetitions = f.repetitions;
    c.seed = f.seed;
    c.discard_fraction = f.discard;
    c.workers = workers;
    return c;
}

std::optional<LabelTable> load_labels(const CommonInputs& in) {
    if (in.labels.empty()) {
        return std::nullopt;
    }
    auto levels = split_csv_list(in.levels);
    if (levels.empty()) {
        throw StageError("config", "--labels requires --levels (comma-separated, coarse to fine)");
    }
    try {
        return read_labels(in.labels, levels);
    } catch (const Error& e) {
        throw StageError("labels", e.what());
    }
}

LayerStack load_stack_tagged(const std::string& manifest) {
    try {
        return load_stack(manifest);
    } catch (const Error& e) {
        throw StageError("load", e.what());
    }
}

void print_paths(const std::vector<fs::path>& paths) {
    for (const auto& p : paths) {
        std::cout << p.string() << '\n';
    }
}

// ---------------------------------------------------------------------------

int run_id(const CommonInputs& in, const IdFlags& flags, std::size_t halvings, double plateau_threshold,
           unsigned workers) {
    const LayerStack stack = load_stack_tagged(in.manifest);
    const IdConfig config = to_id_config(flags, workers);
    std::vector<LayerIdPoint> profile;
    try {
        profile = layer_id_profile(stack, config);
    } catch (const Error& e) {
        throw StageError("id-profile", e.what());
    }
    const std::string csv = id_profile_csv(profile);

    std::string multiscale;
    if (halvings > 0) {
        std::ostringstream ms;
        ms << "layer_id,relative_depth,subset_size,id_mean,id_std,repetitions,in_plateau\n";
        for (const auto& layer : stack.layers) {
            ScaleProfile sp;
            try {
                sp = multiscale_id(layer, config.method, halvings, config.repetitions, config.seed,
                                   config.discard_fraction, workers);
            } catch (const Error& e) {
                throw StageError("multiscale", e.what());
            }
            const ScaleWindow w = find_scale_plateau(sp, plateau_threshold);
            for (std::size_t s = 0; s < sp.scales.size(); ++s) {
                const auto& e = sp.scales[s];
                ms << layer.layer_id() << ',' << format_number(layer.relative_depth()) << ',' << e.subset_size << ','
                   << format_number(e.mean_d) << ',' << format_number(e.std_d) << ',' << e.repetitions << ','
                   << (s >= w.first && s <= w.last ? 1 : 0) << '\n';
            }
        }
        multiscale = ms.str();
    }

    if (in.out.empty()) {
        std::cout << csv;
        if (!multiscale.empty()) {
            std::cout << '\n' << multiscale;
        }
        return 0;
    }
    ArtifactWriter writer(in.out);
    writer.add("id_profile.csv", csv);
    if (!multiscale.empty()) {
        writer.add("id_multiscale.csv", multiscale);
    }
    print_paths(writer.commit());
    return 0;
}

int run_overlap(const CommonInputs& in, std::size_t k, std::size_t gt_k, const std::string& exclusion,
                unsigned workers) {
    const LayerStack stack = load_stack_tagged(in.manifest);
    auto labels = load_labels(in);
    const KnnOptions knn_options{.workers = workers};

    std::vector<OverlapRow> consecutive;
    if (stack.layers.size() >= 2) {
        try {
            for (const auto& c : consecutive_overlaps(stack, k, knn_options)) {
                consecutive.push_back({c.layer_id, c.relative_depth, c.overlap});
            }
        } catch (const Error& e) {
            throw StageError("overlap-consecutive", e.what());
        }
    }

    std::vector<OverlapRow> gt;
    std::string compare;
    if (labels) {
        try {
            const LabelTable aligned = labels->aligned_to(stack.point_ids);
            const auto& levels = aligned.levels();
            const bool hierarchical = levels.size() >= 2;
            const std::size_t kk = gt_k != 0 ? gt_k : (hierarchical ? 10 : 30);
            std::ostringstream cmp;
            cmp << "layer_id,relative_depth,k,filter,postfilter,difference\n";
            for (const auto& layer : stack.layers) {
                if (hierarchical) {
                    RemoteHomologyOptions opts;
                    opts.k = kk;
                    opts.coarse_level = levels[levels.size() - 2];
                    opts.fine_level = levels.back();
                    opts.knn = knn_options;
                    opts.exclusion = HomologyExclusion::filter;
                    const OverlapValue filtered = remote_homology_overlap(layer, aligned, opts);
                    opts.exclusion = HomologyExclusion::postfilter;
                    const OverlapValue post = remote_homology_overlap(layer, aligned, opts);
                    const bool use_post = parse_homology_exclusion(exclusion) == HomologyExclusion::postfilter;
                    gt.push_back({layer.layer_id(), layer.relative_depth(), use_post ? post : filtered});
                    cmp << layer.layer_id() << ',' << format_number(layer.relative_depth()) << ',' << kk << ','
                        << format_number(filtered.value) << ',' << format_number(post.value) << ','
                        << format_number(filtered.value - post.value) << '\n';
                } else {
                    gt.push_back({layer.layer_id(), layer.relative_depth(),
                                  overlap_ground_truth(knn(layer, kk, {}, nullptr, knn_options), aligned,
                                                       levels.front())});
                }
            }
            if (hierarchical) {
                compare = cmp.str();
            }
        } catch (const Error& e) {
            throw StageError("overlap-gt", e.what());
        }
    }

    if (in.out.empty()) {
        std::cout << overlap_csv(consecutive);
        if (labels) {
            std::cout << '\n' << overlap_csv(gt);
        }
        return 0;
    }
    ArtifactWriter writer(in.out);
    writer.add("overlap_consecutive.csv", overlap_csv(consecutive));
    if (labels) {
        writer.add("overlap_gt.csv", overlap_csv(gt));
    }
    if (!compare.empty()) {
        writer.add("overlap_gt_exclusion.csv", compare);
    }
    print_paths(writer.commit());
    return 0;
}

std::vector<double> read_id_means(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw StageError("select", "cannot open " + path);
    }
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_list(line);
    const auto it = std::find(header.begin(), header.end(), "id_mean");
    if (it == header.end()) {
        throw StageError("select", path + ": no id_mean column");
    }
    const auto column = static_cast<std::size_t>(it - header.begin());
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            break;
        }
        const auto fields = split_csv_list(line);
        if (fields.size() <= column) {
            throw StageError("select", path + ":" + std::to_string(line_no) + ": missing id_mean field");
        }
        values.push_back(std::stod(fields[column]));
    }
    return values;
}

int run_select(const std::string& id_csv, const std::string& values, std::size_t window, double prominence) {
    std::vector<double> curve;
    if (!id_csv.empty()) {
        curve = read_id_means(id_csv);
    } else {
        for (const auto& v : split_csv_list(values)) {
            curve.push_back(std::stod(v));
        }
    }
    if (curve.empty()) {
        throw StageError("select", "no ID values given (use --id-csv or --values)");
    }
    DetectionConfig cfg{window, prominence};
    LayerSelection sel;
    try {
        sel = select_semantic_layer(curve, cfg);
    } catch (const Error& e) {
        throw StageError("select", e.what());
    }
    nlohmann::ordered_json j;
    j["n_layers"] = curve.size();
    j["first_peak_index"] = sel.first_peak ? nlohmann::ordered_json(*sel.first_peak) : nlohmann::ordered_json(nullptr);
    j["selected_index"] = sel.index;
    j["fallback"] = sel.fallback;
    j["smoothing_window"] = window;
    j["prominence_fraction"] = prominence;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int run_knn_eval(const CommonInputs& in, const std::string& level_arg, const std::string& exclude_level,
                 std::optional<std::size_t> selected_index, const IdFlags& id_flags, unsigned workers) {
    const LayerStack stack = load_stack_tagged(in.manifest);
    auto labels = load_labels(in);
    if (!labels) {
        throw StageError("config", "knn-eval requires --labels and --levels");
    }
    const LabelTable aligned = [&] {
        try {
            return labels->aligned_to(stack.point_ids);
        } catch (const Error& e) {
            throw StageError("labels", e.what());
        }
    }();
    const auto& levels = aligned.levels();
    const std::string level = !level_arg.empty() ? level_arg : levels.size() >= 2 ? levels[levels.size() - 2]
                                                                                  : levels.front();
    const ExclusionRule rule = exclude_level.empty() ? ExclusionRule::none() : ExclusionRule::same_label(exclude_level);

    std::vector<double> acc;
    try {
        for (const auto& layer : stack.layers) {
            acc.push_back(nn_classification_accuracy(layer, aligned, level, rule, {.workers = workers}));
        }
    } catch (const Error& e) {
        throw StageError("nn-accuracy", e.what());
    }

    std::size_t selected = 0;
    if (selected_index) {
        if (*selected_index >= stack.layers.size()) {
            throw StageError("config", "--selected-index out of range");
        }
        selected = *selected_index;
    } else {
        try {
            std::vector<double> means;
            for (const auto& p : layer_id_profile(stack, to_id_config(id_flags, workers))) {
                means.push_back(p.estimate.d);
            }
            selected = select_semantic_layer(means).index;
        } catch (const Error& e) {
            throw StageError("selection", e.what());
        }
    }

    std::ostringstream csv;
    csv << "layer_id,relative_depth,level,accuracy\n";
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        csv << stack.layers[l].layer_id() << ',' << format_number(stack.layers[l].relative_depth()) << ',' << level
            << ',' << format_number(acc[l]) << '\n';
    }
    nlohmann::ordered_json summary;
    summary["level"] = level;
    summary["excluded_level"] = exclude_level.empty() ? nlohmann::ordered_json(nullptr)
                                                      : nlohmann::ordered_json(exclude_level);
    summary["selected_index"] = selected;
    summary["selected_accuracy"] = acc[selected];
    summary["last_layer_accuracy"] = acc.back();
    summary["gain_percentage_points"] = 100.0 * (acc[selected] - acc.back());
    summary["gain_relative_percent"] = acc.back() > 0.0 ? 100.0 * (acc[selected] - acc.back()) / acc.back() : 0.0;

    if (in.out.empty()) {
        std::cout << csv.str() << '\n' << summary.dump(2) << '\n';
        return 0;
    }
    ArtifactWriter writer(in.out);
    writer.add("knn_eval.csv", csv.str());
    writer.add("knn_eval.json", summary.dump(2) + "\n");
    print_paths(writer.commit());
    return 0;
}

struct SynthFlags {
    std::string kind;
    std::size_t d = 2;
    std::size_t embed = 0;
    std::size_t n = 1000;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::size_t blobs = 4;
    std::size_t layers = 8;
    std::size_t planted = 3;
    std::size_t classes = 10;
    std::size_t per_class = 100;
};

int run_synth(const SynthFlags& f, const std::string& out) {
    ArtifactWriter writer(out);
    LayerStack stack;
    std::optional<LabelTable> labels;
    try {
        if (f.kind == "planted") {
            PlantedStack planted = planted_stack(f.layers, f.planted, f.classes, f.per_class, f.seed);
            stack = std::move(planted.stack);
            labels = std::move(planted.labels);
        } else {
            ManifoldSpec spec;
            spec.kind = parse_manifold_kind(f.kind);
            spec.d_intrinsic = f.d;
            spec.d_embed = f.embed == 0 ? spec.source_dims() : f.embed;
            spec.n_points = f.n;
            spec.noise_sigma = f.noise;
            spec.seed = f.seed;
            spec.n_blobs = f.blobs;
            RepresentationMatrix m = generate(spec);
            m.set_layer(1, 1.0);
            stack.total_blocks = 1;
            stack.layers.push_back(std::move(m));
            for (std::size_t i = 0; i < spec.n_points; ++i) {
                stack.point_ids.push_back(std::to_string(i));
            }
        }
    } catch (const Error& e) {
        throw StageError("synth", e.what());
    }
    save_stack(stack, writer.scratch_dir());
    writer.adopt("manifest.txt");
    writer.adopt("point_ids.txt");
    for (const auto& layer : stack.layers) {
        char name[32];
        std::snprintf(name, sizeof(name), "layer_%03u.rpgm", layer.layer_id());
        writer.adopt(name);
    }
    if (labels) {
        write_labels(*labels, writer.scratch_dir() / "labels.tsv");
        writer.adopt("labels.tsv");
    }
    print_paths(writer.commit());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"repgeom: intrinsic dimension and neighborhood overlap profiles of layer representations"};
    app.set_config("--config", "", "TOML/INI file with option values; command-line flags override it");
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: REPGEOM_THREADS or all cores)");

    CommonInputs in;
    IdFlags id_flags;

    // id
    auto* id_cmd = app.add_subcommand("id", "Per-layer TwoNN intrinsic dimension profile");
    std::size_t halvings = 0;
    double plateau_threshold = 0.10;
    id_cmd->add_option("--manifest", in.manifest, "Layer stack manifest")->required()->check(CLI::ExistingFile);
    add_id_flags(id_cmd, id_flags);
    id_cmd->add_option("--halvings", halvings, "Also write a multiscale table over N, N/2, ... N/2^h");
    id_cmd->add_option("--plateau-threshold", plateau_threshold, "Relative variation defining a scale plateau");
    id_cmd->add_option("--out", in.out, "Output directory (default: CSV on stdout)");

    // overlap
    auto* ov_cmd = app.add_subcommand("overlap", "Neighborhood overlap of consecutive layers and with labels");
    std::size_t k = 30;
    std::size_t gt_k = 0;
    std::string exclusion = "filter";
    ov_cmd->add_option("--manifest", in.manifest, "Layer stack manifest")->required()->check(CLI::ExistingFile);
    ov_cmd->add_option("--labels", in.labels, "Label TSV")->check(CLI::ExistingFile);
    ov_cmd->add_option("--levels", in.levels, "Label levels, coarse to fine (comma-separated)");
    ov_cmd->add_option("--k", k, "Neighborhood size for consecutive overlaps")->check(CLI::PositiveNumber);
    ov_cmd->add_option("--gt-k", gt_k, "Neighborhood size for the label overlap (default 10 hierarchical, 30 flat)");
    ov_cmd->add_option("--exclusion", exclusion, "Same-family exclusion for remote homology")
        ->check(CLI::IsMember({"filter", "postfilter"}));
    ov_cmd->add_option("--out", in.out, "Output directory (default: CSV on stdout)");

    // select
    auto* sel_cmd = app.add_subcommand("select", "Pick the layer at the ID minimum after the first peak");
    std::string id_csv;
    std::string values;
    std::size_t window = 1;
    double prominence = 0.05;
    auto* id_csv_opt = sel_cmd->add_option("--id-csv", id_csv, "id_profile.csv from `repgeom id`");
    auto* values_opt = sel_cmd->add_option("--values", values, "Comma-separated ID curve");
    id_csv_opt->excludes(values_opt);
    sel_cmd->add_option("--smoothing", window, "Odd moving-average window (1 = off)");
    sel_cmd->add_option("--prominence", prominence, "Minimum peak prominence as a fraction of the curve range");

    // knn-eval
    auto* nn_cmd = app.add_subcommand("knn-eval", "1-NN label retrieval accuracy per layer");
    std::string nn_level;
    std::string nn_exclude;
    std::optional<std::size_t> selected_index;
    nn_cmd->add_option("--manifest", in.manifest, "Layer stack manifest")->required()->check(CLI::ExistingFile);
    nn_cmd->add_option("--labels", in.labels, "Label TSV")->required()->check(CLI::ExistingFile);
    nn_cmd->add_option("--levels", in.levels, "Label levels, coarse to fine")->required();
    nn_cmd->add_option("--level", nn_level, "Level scored (default: second-finest, or the only one)");
    nn_cmd->add_option("--exclude-level", nn_exclude, "Skip candidates sharing this level's label");
    nn_cmd->add_option("--selected-index", selected_index, "Layer compared to the last (default: ID selection)");
    add_id_flags(nn_cmd, id_flags);
    nn_cmd->add_option("--out", in.out, "Output directory (default: stdout)");

    // synth
    auto* syn_cmd = app.add_subcommand("synth", "Synthetic manifolds and planted layer stacks");
    SynthFlags sf;
    syn_cmd->add_option("kind", sf.kind, "hypercube | hypersphere | swiss-roll | gaussian-blobs | planted")
        ->required()
        ->check(CLI::IsMember({"hypercube", "hypersphere", "swiss-roll", "gaussian-blobs", "planted"}));
    syn_cmd->add_option("--d", sf.d, "Intrinsic dimension");
    syn_cmd->add_option("--embed", sf.embed, "Embedding dimension (default: minimal)");
    syn_cmd->add_option("--n", sf.n, "Number of points");
    syn_cmd->add_option("--noise", sf.noise, "Isotropic noise sigma");
    syn_cmd->add_option("--seed", sf.seed, "Seed");
    syn_cmd->add_option("--blobs", sf.blobs, "gaussian-blobs: number of blobs");
    syn_cmd->add_option("--layers", sf.layers, "planted: number of layers");
    syn_cmd->add_option("--planted", sf.planted, "planted: index of the semantic layer");
    syn_cmd->add_option("--classes", sf.classes, "planted: number of classes");
    syn_cmd->add_option("--per-class", sf.per_class, "planted: points per class");
    syn_cmd->add_option("--out", in.out, "Output directory")->required();

    // report
    auto* rep_cmd = app.add_subcommand("report", "Full pipeline: profiles, selection, JSON/CSV/SVG outputs");
    ReportConfig rc;
    bool no_nn = false;
    rep_cmd->add_option("--manifest", in.manifest, "Layer stack manifest")->required()->check(CLI::ExistingFile);
    rep_cmd->add_option("--labels", in.labels, "Label TSV")->check(CLI::ExistingFile);
    rep_cmd->add_option("--levels", in.levels, "Label levels, coarse to fine (comma-separated)");
    add_id_flags(rep_cmd, id_flags);
    rep_cmd->add_option("--k", rc.consecutive_k, "k for consecutive overlaps (default: the label k, or 30)");
    rep_cmd->add_option("--gt-k", rc.gt_k, "k for the label overlap (default 10 hierarchical, 30 flat)");
    rep_cmd->add_option("--exclusion", exclusion, "Same-family exclusion for remote homology")
        ->check(CLI::IsMember({"filter", "postfilter"}));
    rep_cmd->add_option("--smoothing", rc.detection.smoothing_window, "Odd moving-average window (1 = off)");
    rep_cmd->add_option("--prominence", rc.detection.prominence_fraction, "Minimum peak prominence fraction");
    rep_cmd->add_option("--nn-exclude-level", rc.nn_exclude_level, "1-NN search: skip same-label candidates");
    rep_cmd->add_flag("--no-nn", no_nn, "Skip the 1-NN accuracy probe");
    rep_cmd->add_option("--out", in.out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const unsigned workers = threads;
        if (app.got_subcommand(id_cmd)) {
            return run_id(in, id_flags, halvings, plateau_threshold, workers);
        }
        if (app.got_subcommand(ov_cmd)) {
            return run_overlap(in, k, gt_k, exclusion, workers);
        }
        if (app.got_subcommand(sel_cmd)) {
            return run_select(id_csv, values, window, prominence);
        }
        if (app.got_subcommand(nn_cmd)) {
            return run_knn_eval(in, nn_level, nn_exclude, selected_index, id_flags, workers);
        }
        if (app.got_subcommand(syn_cmd)) {
            return run_synth(sf, in.out);
        }
        if (app.got_subcommand(rep_cmd)) {
            const LayerStack stack = load_stack_tagged(in.manifest);
            const auto labels = load_labels(in);
            rc.id = to_id_config(id_flags, threads);
            rc.exclusion = parse_homology_exclusion(exclusion);
            rc.nn_accuracy = !no_nn;
            rc.workers = threads;
            const ProfileReport report = build_report(stack, labels ? &*labels : nullptr, rc);
            const PlotFiles plots = report_plots(report);

            ArtifactWriter writer(in.out);
            writer.add("report.json", report_json(report, in.manifest, in.labels));
            writer.add("id_profile.csv", id_profile_csv(report_id_points(report)));
            writer.add("overlap_consecutive.csv", overlap_csv(report_consecutive_rows(report)));
            if (report.chi_gt) {
                writer.add("overlap_gt.csv", overlap_csv(report_gt_rows(report)));
            }
            writer.add("id_profile.svg", plots.id_profile);
            writer.add("overlap_consecutive.svg", plots.overlap_consecutive);
            if (report.chi_gt) {
                writer.add("overlap_gt.svg", plots.overlap_gt);
            }
            print_paths(writer.commit());
            return 0;
        }
    } catch (const StageError& e) {
        std::cerr << "repgeom: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "repgeom: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
