#pragma once

#include "repgeom/id_twonn.hpp"
#include "repgeom/neighbors.hpp"
#include "repgeom/overlap.hpp"
#include "repgeom/tensor_store.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace repgeom {

/// Knobs of the peak / minimum detection on an ID curve.
struct DetectionConfig {
    std::size_t smoothing_window = 1;   // centered moving average, odd; 1 = off
    double prominence_fraction = 0.05;  // of (max - min) of the smoothed curve

    void validate() const;
};

/// Centered moving average; the window shrinks symmetrically at the ends.
std::vector<double> smooth_curve(std::span<const double> curve, std::size_t window);

/// Height of curve[i] above the higher of the two lowest points reached before
/// meeting a strictly higher value (or the end) on each side.
double peak_prominence(std::span<const double> curve, std::size_t i);

/// Smallest interior index that is a strict local maximum with enough prominence.
std::optional<std::size_t> detect_first_peak(std::span<const double> curve, const DetectionConfig& config = {});

struct LayerSelection {
    std::size_t index = 0;
    std::optional<std::size_t> first_peak;
    bool fallback = false;  // no usable peak: global argmin over interior indices
};

/// Argmin of the smoothed curve strictly between the first peak and the last
/// layer (ties to the smallest index).
LayerSelection select_semantic_layer(std::span<const double> curve, const DetectionConfig& config = {});

/// Fraction of points whose nearest admissible neighbor shares their label at `level`.
double nn_classification_accuracy(const RepresentationMatrix& matrix, const LabelTable& labels,
                                  const std::string& level, const ExclusionRule& rule = {},
                                  const KnnOptions& options = {});

struct ReportConfig {
    IdConfig id;
    DetectionConfig detection;
    std::size_t consecutive_k = 0;  // 0: same as the ground-truth k (30 without labels)
    std::size_t gt_k = 0;           // 0: 10 for hierarchical labels, 30 otherwise
    HomologyExclusion exclusion = HomologyExclusion::filter;
    bool nn_accuracy = true;         // only with labels
    std::string nn_exclude_level;   // empty: plain 1-NN search
    unsigned workers = 0;
};

struct NnComparison {
    double selected_accuracy = 0.0;
    double last_accuracy = 0.0;
    double gain_points = 0.0;    // 100 * (selected - last)
    double gain_relative = 0.0;  // 100 * (selected - last) / last
};

struct ProfileReport {
    struct Layer {
        std::uint32_t layer_id = 0;
        double relative_depth = 0.0;
    };

    std::vector<Layer> layers;
    std::vector<IdEstimate> id_curve;
    std::vector<DepthOverlap> chi_consecutive;
    std::size_t consecutive_k = 0;

    std::optional<std::vector<OverlapValue>> chi_gt;
    std::string gt_level;        // level scored by chi_gt (coarse level for remote homology)
    std::string gt_exclude_level;  // fine level excluded, remote homology only
    std::optional<std::size_t> gt_argmax;

    std::optional<std::vector<double>> nn_accuracy;
    std::optional<NnComparison> nn_comparison;

    LayerSelection selection;
    ReportConfig config;  // resolved values (defaults filled in)
    std::uint32_t total_blocks = 0;
    std::size_t n_points = 0;
};

/// Full pipeline: ID profile, consecutive overlaps, optional label probes,
/// detection and selection. Errors are StageError tagged with the stage.
ProfileReport build_report(const LayerStack& stack, const LabelTable* labels, const ReportConfig& config);

/// Index of the largest value, ties to the smallest index.
std::size_t argmax_index(std::span<const double> values);

}  // namespace repgeom
