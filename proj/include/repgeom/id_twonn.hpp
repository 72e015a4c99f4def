#pragma once

#include "repgeom/neighbors.hpp"
#include "repgeom/tensor_store.hpp"

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace repgeom {

enum class IdMethod { mle, regression };

std::string_view to_string(IdMethod method);
IdMethod parse_id_method(std::string_view name);

/// Second- to first-neighbor distance ratios, one per point with r1 > 0.
struct MuSample {
    std::vector<double> values;
    std::size_t n_dropped_duplicates = 0;
};

struct IdEstimate {
    double d = 0.0;
    IdMethod method = IdMethod::mle;
    std::size_t n_used = 0;          // ratios entering the fit (minimum over repetitions)
    std::size_t scale = 0;           // points per subset
    double uncertainty = 0.0;        // d/sqrt(n_used) for one fit; std over repetitions otherwise
    std::size_t n_dropped_duplicates = 0;  // maximum over repetitions
    std::size_t repetitions = 1;
};

MuSample mu_ratios(const NeighborIndex& index);

/// Closed-form Pareto maximum likelihood: d = n / sum(ln mu).
IdEstimate twonn_mle(const MuSample& sample);

/// Slope through the origin of -ln(1 - i/n) against ln mu_(i) over the sorted
/// ratios, dropping the largest `discard_fraction` of them and always the last rank.
IdEstimate twonn_regression(const MuSample& sample, double discard_fraction = 0.1);

struct IdConfig {
    IdMethod method = IdMethod::mle;
    std::size_t decimation_factor = 4;
    std::size_t repetitions = 5;
    std::uint64_t seed = 0;
    double discard_fraction = 0.1;  // regression only
    unsigned workers = 0;
};

/// Seed of the random stream for one (scale, repetition) cell.
///
/// stream = splitmix64(splitmix64(root) + 0x9e3779b97f4a7c15 * (scale_key * 2^32 + repetition + 1)).
/// The layer is deliberately not part of the key, so every layer of a stack is
/// decimated with the same subsets.
std::uint64_t derive_stream_seed(std::uint64_t root, std::uint64_t scale_key, std::uint64_t repetition);

/// `m` distinct indices from [0, n), sorted ascending. m == n returns 0..n-1.
std::vector<std::size_t> draw_subset(std::size_t n, std::size_t m, std::uint64_t seed);

/// Mean TwoNN estimate over `repetitions` random subsets of size floor(N/decimation_factor).
IdEstimate estimate_id(const RepresentationMatrix& matrix, const IdConfig& config);

struct ScaleEntry {
    std::size_t subset_size = 0;
    double mean_d = 0.0;
    double std_d = 0.0;
    std::size_t repetitions = 0;
};

struct ScaleProfile {
    std::vector<ScaleEntry> scales;  // N, N/2, N/4, ...
};

/// Estimates at subset sizes floor(N / 2^j), j = 0..max_halvings.
ScaleProfile multiscale_id(const RepresentationMatrix& matrix, IdMethod method, std::size_t max_halvings,
                           std::size_t repetitions, std::uint64_t seed, double discard_fraction = 0.1,
                           unsigned workers = 0);

struct ScaleWindow {
    std::size_t first = 0;  // indices into ScaleProfile::scales, inclusive
    std::size_t last = 0;
    double relative_variation = 0.0;  // (max - min) / min of the window's means
};

/// Widest run of consecutive scales whose means vary by less than `threshold`
/// (relative to the smallest mean). Ties go to the run at larger subset sizes.
ScaleWindow find_scale_plateau(const ScaleProfile& profile, double threshold = 0.10);

struct LayerIdPoint {
    std::uint32_t layer_id = 0;
    double relative_depth = 0.0;
    IdEstimate estimate;
};

std::vector<LayerIdPoint> layer_id_profile(const LayerStack& stack, const IdConfig& config);

}  // namespace repgeom
