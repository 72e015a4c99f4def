#include "repgeom/report_io.hpp"

#include "repgeom/error.hpp"
#include "repgeom/svg_plot.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace repgeom {

std::string format_number(double v) {
    char buf[40];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) {
            break;
        }
    }
    return buf;
}

std::string id_profile_csv(const std::vector<LayerIdPoint>& profile) {
    std::ostringstream out;
    out << "layer_id,relative_depth,id_mean,id_std,method,scale,n_dropped_duplicates\n";
    for (const auto& p : profile) {
        out << p.layer_id << ',' << format_number(p.relative_depth) << ',' << format_number(p.estimate.d) << ','
            << format_number(p.estimate.uncertainty) << ',' << to_string(p.estimate.method) << ','
            << p.estimate.scale << ',' << p.estimate.n_dropped_duplicates << '\n';
    }
    return out.str();
}

std::string overlap_csv(const std::vector<OverlapRow>& rows) {
    std::ostringstream out;
    out << "layer_id,relative_depth,kind,k,value\n";
    for (const auto& r : rows) {
        out << r.layer_id << ',' << format_number(r.relative_depth) << ',' << to_string(r.overlap.kind) << ','
            << r.overlap.k << ',' << format_number(r.overlap.value) << '\n';
    }
    return out.str();
}

std::vector<LayerIdPoint> report_id_points(const ProfileReport& report) {
    std::vector<LayerIdPoint> out;
    for (std::size_t l = 0; l < report.layers.size(); ++l) {
        out.push_back({report.layers[l].layer_id, report.layers[l].relative_depth, report.id_curve[l]});
    }
    return out;
}

std::vector<OverlapRow> report_consecutive_rows(const ProfileReport& report) {
    std::vector<OverlapRow> out;
    for (const auto& c : report.chi_consecutive) {
        out.push_back({c.layer_id, c.relative_depth, c.overlap});
    }
    return out;
}

std::vector<OverlapRow> report_gt_rows(const ProfileReport& report) {
    std::vector<OverlapRow> out;
    if (!report.chi_gt) {
        return out;
    }
    for (std::size_t l = 0; l < report.layers.size(); ++l) {
        out.push_back({report.layers[l].layer_id, report.layers[l].relative_depth, (*report.chi_gt)[l]});
    }
    return out;
}

std::string report_json(const ProfileReport& report, const std::string& manifest, const std::string& labels_path) {
    using nlohmann::ordered_json;
    const ReportConfig& c = report.config;

    ordered_json j;
    j["format"] = "repgeom-report";
    j["version"] = 1;

    ordered_json cfg;
    cfg["manifest"] = manifest;
    cfg["labels"] = labels_path.empty() ? ordered_json(nullptr) : ordered_json(labels_path);
    cfg["seed"] = c.id.seed;
    cfg["id_method"] = std::string(to_string(c.id.method));
    cfg["decimation_factor"] = c.id.decimation_factor;
    cfg["repetitions"] = c.id.repetitions;
    cfg["discard_fraction"] = c.id.discard_fraction;
    cfg["consecutive_k"] = c.consecutive_k;
    cfg["gt_k"] = c.gt_k;
    cfg["exclusion"] = c.exclusion == HomologyExclusion::filter ? "filter" : "postfilter";
    cfg["nn_accuracy"] = c.nn_accuracy;
    cfg["nn_exclude_level"] = c.nn_exclude_level;
    cfg["smoothing_window"] = c.detection.smoothing_window;
    cfg["prominence_fraction"] = c.detection.prominence_fraction;
    j["config"] = cfg;

    j["n_points"] = report.n_points;
    j["total_blocks"] = report.total_blocks;

    ordered_json layers = ordered_json::array();
    for (std::size_t l = 0; l < report.layers.size(); ++l) {
        const auto& e = report.id_curve[l];
        ordered_json row;
        row["index"] = l;
        row["layer_id"] = report.layers[l].layer_id;
        row["relative_depth"] = report.layers[l].relative_depth;
        row["id_mean"] = e.d;
        row["id_std"] = e.uncertainty;
        row["id_scale"] = e.scale;
        row["id_n_used"] = e.n_used;
        row["n_dropped_duplicates"] = e.n_dropped_duplicates;
        if (report.chi_gt) {
            row["chi_gt"] = (*report.chi_gt)[l].value;
        }
        if (report.nn_accuracy) {
            row["nn_accuracy"] = (*report.nn_accuracy)[l];
        }
        layers.push_back(row);
    }
    j["layers"] = layers;

    ordered_json consecutive = ordered_json::array();
    for (const auto& c2 : report.chi_consecutive) {
        ordered_json row;
        row["layer_id"] = c2.layer_id;
        row["relative_depth"] = c2.relative_depth;
        row["k"] = c2.overlap.k;
        row["value"] = c2.overlap.value;
        consecutive.push_back(row);
    }
    j["chi_consecutive"] = consecutive;

    if (report.chi_gt) {
        ordered_json gt;
        gt["kind"] = std::string(to_string(report.chi_gt->front().kind));
        gt["level"] = report.gt_level;
        gt["excluded_level"] = report.gt_exclude_level.empty() ? ordered_json(nullptr)
                                                               : ordered_json(report.gt_exclude_level);
        gt["k"] = report.chi_gt->front().k;
        gt["argmax_index"] = *report.gt_argmax;
        gt["argmax_layer_id"] = report.layers[*report.gt_argmax].layer_id;
        j["chi_gt"] = gt;
    } else {
        j["chi_gt"] = nullptr;
    }

    ordered_json sel;
    sel["first_peak_index"] = report.selection.first_peak ? ordered_json(*report.selection.first_peak)
                                                          : ordered_json(nullptr);
    sel["selected_index"] = report.selection.index;
    sel["selected_layer_id"] = report.layers[report.selection.index].layer_id;
    sel["selected_relative_depth"] = report.layers[report.selection.index].relative_depth;
    sel["fallback"] = report.selection.fallback;
    j["selection"] = sel;

    if (report.nn_comparison) {
        const auto& n = *report.nn_comparison;
        ordered_json cmp;
        cmp["level"] = report.gt_level;
        cmp["selected_accuracy"] = n.selected_accuracy;
        cmp["last_layer_accuracy"] = n.last_accuracy;
        cmp["gain_percentage_points"] = n.gain_points;
        cmp["gain_relative_percent"] = n.gain_relative;
        j["nn_comparison"] = cmp;
    } else {
        j["nn_comparison"] = nullptr;
    }
    return j.dump(2) + "\n";
}

PlotFiles report_plots(const ProfileReport& report) {
    PlotFiles files;
    const double marker = report.layers[report.selection.index].relative_depth;

    LinePlot id_plot;
    id_plot.title = "Intrinsic dimension profile";
    id_plot.x_label = "relative depth";
    id_plot.y_label = "ID";
    id_plot.marker_x = marker;
    PlotSeries id_series;
    id_series.name = "TwoNN " + std::string(to_string(report.config.id.method));
    for (std::size_t l = 0; l < report.layers.size(); ++l) {
        id_series.x.push_back(report.layers[l].relative_depth);
        id_series.y.push_back(report.id_curve[l].d);
    }
    id_plot.series.push_back(std::move(id_series));
    files.id_profile = render_svg(id_plot);

    LinePlot chi_plot;
    chi_plot.title = "Overlap of consecutive layers";
    chi_plot.x_label = "relative depth";
    chi_plot.y_label = "chi(l, l+1)";
    chi_plot.y_min = 0.0;
    chi_plot.y_max = 1.0;
    chi_plot.marker_x = marker;
    PlotSeries chi_series;
    chi_series.name = "k=" + std::to_string(report.consecutive_k);
    for (const auto& c : report.chi_consecutive) {
        chi_series.x.push_back(c.relative_depth);
        chi_series.y.push_back(c.overlap.value);
    }
    chi_plot.series.push_back(std::move(chi_series));
    files.overlap_consecutive = render_svg(chi_plot);

    if (report.chi_gt) {
        LinePlot gt_plot;
        gt_plot.title = "Overlap with ground-truth labels";
        gt_plot.x_label = "relative depth";
        gt_plot.y_label = "chi(l, gt)";
        gt_plot.y_min = 0.0;
        gt_plot.y_max = 1.0;
        gt_plot.marker_x = marker;
        PlotSeries gt_series;
        gt_series.name = report.gt_level + ", k=" + std::to_string(report.chi_gt->front().k);
        for (std::size_t l = 0; l < report.layers.size(); ++l) {
            gt_series.x.push_back(report.layers[l].relative_depth);
            gt_series.y.push_back((*report.chi_gt)[l].value);
        }
        gt_plot.series.push_back(std::move(gt_series));
        files.overlap_gt = render_svg(gt_plot);
    }
    return files;
}

// ---------------------------------------------------------------------------

ArtifactWriter::ArtifactWriter(fs::path out_dir) : out_dir_(std::move(out_dir)) {
    if (out_dir_.empty()) {
        throw Error("output directory must not be empty");
    }
    fs::path parent = fs::absolute(out_dir_).parent_path();
    fs::create_directories(parent);
    const std::string stem = fs::absolute(out_dir_).filename().string();
    for (int attempt = 0;; ++attempt) {
        scratch_ = parent / ("." + stem + ".partial-" + std::to_string(attempt));
        if (fs::create_directory(scratch_)) {
            break;
        }
        if (attempt > 1000) {
            throw Error("cannot create a scratch directory next to " + out_dir_.string());
        }
    }
}

ArtifactWriter::~ArtifactWriter() {
    if (!committed_) {
        std::error_code ec;
        fs::remove_all(scratch_, ec);
    }
}

void ArtifactWriter::add(const std::string& name, const std::string& content) {
    std::ofstream out(scratch_ / name, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw Error("write failed for " + (scratch_ / name).string());
    }
    names_.push_back(name);
}

void ArtifactWriter::adopt(const std::string& name) {
    if (!fs::exists(scratch_ / name)) {
        throw Error("no file " + name + " in " + scratch_.string());
    }
    names_.push_back(name);
}

std::vector<fs::path> ArtifactWriter::commit() {
    std::vector<fs::path> out;
    if (!fs::exists(out_dir_)) {
        fs::rename(scratch_, out_dir_);
    } else {
        for (const auto& name : names_) {
            fs::rename(scratch_ / name, out_dir_ / name);
        }
        fs::remove_all(scratch_);
    }
    committed_ = true;
    for (const auto& name : names_) {
        out.push_back(out_dir_ / name);
    }
    return out;
}

}  // namespace repgeom
