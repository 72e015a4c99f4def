#include "repgeom/profiles.hpp"

#include "repgeom/error.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace repgeom {

void DetectionConfig::validate() const {
    if (smoothing_window < 1 || smoothing_window % 2 == 0) {
        throw Error("smoothing window must be an odd integer >= 1, got " + std::to_string(smoothing_window));
    }
    if (!(prominence_fraction > 0.0 && prominence_fraction < 1.0)) {
        throw Error("prominence fraction must lie in (0, 1)");
    }
}

std::vector<double> smooth_curve(std::span<const double> curve, std::size_t window) {
    const std::size_t n = curve.size();
    if (window <= 1 || n == 0) {
        return {curve.begin(), curve.end()};
    }
    const std::size_t half = window / 2;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t h = std::min({half, i, n - 1 - i});
        double sum = 0.0;
        for (std::size_t j = i - h; j <= i + h; ++j) {
            sum += curve[j];
        }
        out[i] = sum / static_cast<double>(2 * h + 1);
    }
    return out;
}

double peak_prominence(std::span<const double> curve, std::size_t i) {
    const double height = curve[i];
    double left_min = height;
    for (std::size_t j = i; j-- > 0;) {
        if (curve[j] > height) {
            break;
        }
        left_min = std::min(left_min, curve[j]);
    }
    double right_min = height;
    for (std::size_t j = i + 1; j < curve.size(); ++j) {
        if (curve[j] > height) {
            break;
        }
        right_min = std::min(right_min, curve[j]);
    }
    return height - std::max(left_min, right_min);
}

namespace {

std::optional<std::size_t> first_peak_of(const std::vector<double>& s, double prominence_fraction) {
    if (s.size() < 3) {
        return std::nullopt;
    }
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    const double min_prominence = prominence_fraction * (*hi - *lo);
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        if (s[i] > s[i - 1] && s[i] > s[i + 1] && peak_prominence(s, i) >= min_prominence) {
            return i;
        }
    }
    return std::nullopt;
}

std::size_t argmin_range(const std::vector<double>& s, std::size_t first, std::size_t last) {
    std::size_t best = first;
    for (std::size_t i = first + 1; i <= last; ++i) {
        if (s[i] < s[best]) {
            best = i;
        }
    }
    return best;
}

}  // namespace

std::optional<std::size_t> detect_first_peak(std::span<const double> curve, const DetectionConfig& config) {
    config.validate();
    return first_peak_of(smooth_curve(curve, config.smoothing_window), config.prominence_fraction);
}

LayerSelection select_semantic_layer(std::span<const double> curve, const DetectionConfig& config) {
    config.validate();
    if (curve.empty()) {
        throw Error("cannot select a layer from an empty curve");
    }
    const std::vector<double> s = smooth_curve(curve, config.smoothing_window);
    const std::size_t n = s.size();
    LayerSelection out;
    if (n < 3) {
        out.index = argmin_range(s, 0, n - 1);
        out.fallback = true;
        return out;
    }
    out.first_peak = first_peak_of(s, config.prominence_fraction);
    if (out.first_peak && *out.first_peak + 1 <= n - 2) {
        out.index = argmin_range(s, *out.first_peak + 1, n - 2);
        return out;
    }
    out.index = argmin_range(s, 1, n - 2);
    out.fallback = true;
    return out;
}

double nn_classification_accuracy(const RepresentationMatrix& matrix, const LabelTable& labels,
                                  const std::string& level, const ExclusionRule& rule, const KnnOptions& options) {
    if (labels.size() != matrix.n_points()) {
        throw Error("labels misaligned: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(matrix.n_points()) + " points");
    }
    const auto& codes = labels.codes(level);
    if (rule.mode == ExclusionMode::none) {
        std::unordered_map<std::int32_t, std::size_t> counts;
        for (const auto c : codes) {
            ++counts[c];
        }
        const std::size_t lvl = labels.level_index(level);
        for (std::size_t i = 0; i < codes.size(); ++i) {
            if (counts[codes[i]] < 2) {
                throw Error(level + " '" + labels.label(i, lvl) + "' has a single member ('" +
                            labels.point_ids()[i] + "'); 1-NN search needs at least 2 per class");
            }
        }
    }
    const NeighborIndex index = knn(matrix, 1, rule, rule.mode == ExclusionMode::none ? nullptr : &labels, options);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < index.n_points(); ++i) {
        hits += codes[index.neighbors(i)[0]] == codes[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(index.n_points());
}

std::size_t argmax_index(std::span<const double> values) {
    if (values.empty()) {
        throw Error("argmax of an empty sequence");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
        }
    }
    return best;
}

namespace {

template <class F>
auto run_stage(const char* stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

}  // namespace

ProfileReport build_report(const LayerStack& stack, const LabelTable* labels, const ReportConfig& config) {
    if (stack.layers.empty()) {
        throw StageError("input", "layer stack is empty");
    }
    run_stage("input", [&] {
        stack.validate();
        config.detection.validate();
    });

    ProfileReport report;
    report.config = config;
    report.config.id.workers = config.workers;
    report.total_blocks = stack.total_blocks;
    report.n_points = stack.n_points();
    for (const auto& layer : stack.layers) {
        report.layers.push_back({layer.layer_id(), layer.relative_depth()});
    }

    std::optional<LabelTable> aligned;
    if (labels != nullptr) {
        aligned = run_stage("labels", [&] {
            if (labels->levels().empty()) {
                throw Error("label table has no levels");
            }
            return labels->aligned_to(stack.point_ids);
        });
    }
    const bool hierarchical = aligned && aligned->levels().size() >= 2;
    std::size_t& gt_k = report.config.gt_k;
    if (gt_k == 0) {
        gt_k = hierarchical ? 10 : 30;
    }
    std::size_t& consecutive_k = report.config.consecutive_k;
    if (consecutive_k == 0) {
        consecutive_k = aligned ? gt_k : 30;
    }
    report.consecutive_k = consecutive_k;
    const KnnOptions knn_options{.workers = config.workers};

    const auto id_points = run_stage("id-profile", [&] { return layer_id_profile(stack, report.config.id); });
    for (const auto& p : id_points) {
        report.id_curve.push_back(p.estimate);
    }

    if (stack.layers.size() >= 2) {
        report.chi_consecutive =
            run_stage("overlap-consecutive", [&] { return consecutive_overlaps(stack, consecutive_k, knn_options); });
    }

    if (aligned) {
        const auto& levels = aligned->levels();
        report.gt_level = hierarchical ? levels[levels.size() - 2] : levels.front();
        if (hierarchical) {
            report.gt_exclude_level = levels.back();
        }
        report.chi_gt = run_stage("overlap-gt", [&] {
            std::vector<OverlapValue> values;
            for (const auto& layer : stack.layers) {
                if (hierarchical) {
                    RemoteHomologyOptions opts;
                    opts.k = gt_k;
                    opts.coarse_level = report.gt_level;
                    opts.fine_level = report.gt_exclude_level;
                    opts.exclusion = config.exclusion;
                    opts.knn = knn_options;
                    values.push_back(remote_homology_overlap(layer, *aligned, opts));
                } else {
                    values.push_back(overlap_ground_truth(knn(layer, gt_k, {}, nullptr, knn_options), *aligned,
                                                          report.gt_level));
                }
            }
            return values;
        });
        std::vector<double> gt_values;
        for (const auto& v : *report.chi_gt) {
            gt_values.push_back(v.value);
        }
        report.gt_argmax = argmax_index(gt_values);

        if (config.nn_accuracy) {
            report.nn_accuracy = run_stage("nn-accuracy", [&] {
                const ExclusionRule rule = config.nn_exclude_level.empty()
                                               ? ExclusionRule::none()
                                               : ExclusionRule::same_label(config.nn_exclude_level);
                std::vector<double> acc;
                for (const auto& layer : stack.layers) {
                    acc.push_back(nn_classification_accuracy(layer, *aligned, report.gt_level, rule, knn_options));
                }
                return acc;
            });
        }
    }

    std::vector<double> id_means;
    for (const auto& e : report.id_curve) {
        id_means.push_back(e.d);
    }
    report.selection = run_stage("selection", [&] { return select_semantic_layer(id_means, config.detection); });

    if (report.nn_accuracy) {
        NnComparison cmp;
        cmp.selected_accuracy = (*report.nn_accuracy)[report.selection.index];
        cmp.last_accuracy = report.nn_accuracy->back();
        cmp.gain_points = 100.0 * (cmp.selected_accuracy - cmp.last_accuracy);
        cmp.gain_relative =
            cmp.last_accuracy > 0.0 ? 100.0 * (cmp.selected_accuracy - cmp.last_accuracy) / cmp.last_accuracy : 0.0;
        report.nn_comparison = cmp;
    }
    return report;
}

}  // namespace repgeom
