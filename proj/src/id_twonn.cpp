#include "repgeom/id_twonn.hpp"

#include "repgeom/error.hpp"
#include "repgeom/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace repgeom {

std::string_view to_string(IdMethod method) {
    return method == IdMethod::mle ? "mle" : "regression";
}

IdMethod parse_id_method(std::string_view name) {
    if (name == "mle") {
        return IdMethod::mle;
    }
    if (name == "regression") {
        return IdMethod::regression;
    }
    throw Error("unknown ID method '" + std::string(name) + "' (expected mle or regression)");
}

MuSample mu_ratios(const NeighborIndex& index) {
    if (index.k() < 2) {
        throw Error("mu ratios need k >= 2 neighbors, got k=" + std::to_string(index.k()));
    }
    MuSample sample;
    sample.values.reserve(index.n_points());
    for (std::size_t i = 0; i < index.n_points(); ++i) {
        const auto r = index.distances(i);
        if (r[0] <= 0.0) {
            ++sample.n_dropped_duplicates;
            continue;
        }
        sample.values.push_back(r[1] / r[0]);
    }
    if (sample.values.empty()) {
        throw Error("no valid ratios: every point has a duplicate at distance 0");
    }
    return sample;
}

IdEstimate twonn_mle(const MuSample& sample) {
    if (sample.values.empty()) {
        throw Error("no valid ratios");
    }
    double sum_log = 0.0;
    for (const double mu : sample.values) {
        sum_log += std::log(mu);
    }
    if (!(sum_log > 0.0)) {
        throw Error("degenerate ratios: every mu equals 1");
    }
    IdEstimate est;
    est.method = IdMethod::mle;
    est.n_used = sample.values.size();
    est.scale = sample.values.size() + sample.n_dropped_duplicates;
    est.d = static_cast<double>(est.n_used) / sum_log;
    est.uncertainty = est.d / std::sqrt(static_cast<double>(est.n_used));
    est.n_dropped_duplicates = sample.n_dropped_duplicates;
    return est;
}

IdEstimate twonn_regression(const MuSample& sample, double discard_fraction) {
    if (!(discard_fraction >= 0.0 && discard_fraction < 1.0)) {
        throw Error("discard_fraction must lie in [0, 1)");
    }
    const std::size_t n = sample.values.size();
    if (n < 3) {
        throw Error("regression needs at least 3 ratios, have " + std::to_string(n));
    }
    std::vector<double> sorted = sample.values;
    std::sort(sorted.begin(), sorted.end());

    // Ranks 1..m, where rank n (empirical CDF = 1) is never usable.
    const auto kept = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - discard_fraction)));
    const std::size_t m = std::min(kept, n - 1);
    if (m < 2) {
        throw Error("regression needs at least 2 ratios after discarding, have " + std::to_string(m));
    }
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 1; i <= m; ++i) {
        const double x = std::log(sorted[i - 1]);
        const double y = -std::log1p(-static_cast<double>(i) / static_cast<double>(n));
        sxy += x * y;
        sxx += x * x;
    }
    if (!(sxx > 0.0)) {
        throw Error("regression is degenerate: all retained ln(mu) are 0");
    }
    IdEstimate est;
    est.method = IdMethod::regression;
    est.n_used = m;
    est.scale = n + sample.n_dropped_duplicates;
    est.d = sxy / sxx;
    est.uncertainty = est.d / std::sqrt(static_cast<double>(m));
    est.n_dropped_duplicates = sample.n_dropped_duplicates;
    return est;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

IdEstimate fit(const MuSample& sample, const IdConfig& config) {
    return config.method == IdMethod::mle ? twonn_mle(sample) : twonn_regression(sample, config.discard_fraction);
}

}  // namespace

std::uint64_t derive_stream_seed(std::uint64_t root, std::uint64_t scale_key, std::uint64_t repetition) {
    const std::uint64_t counter = (scale_key << 32) + repetition + 1;
    return splitmix64(splitmix64(root) + 0x9e3779b97f4a7c15ULL * counter);
}

std::vector<std::size_t> draw_subset(std::size_t n, std::size_t m, std::uint64_t seed) {
    if (m > n) {
        throw Error("cannot draw " + std::to_string(m) + " of " + std::to_string(n) + " points");
    }
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    if (m == n) {
        return pool;
    }
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(m);
    std::sort(pool.begin(), pool.end());
    return pool;
}

IdEstimate estimate_id(const RepresentationMatrix& matrix, const IdConfig& config) {
    if (config.decimation_factor < 1) {
        throw Error("decimation factor must be >= 1");
    }
    if (config.repetitions < 1) {
        throw Error("repetitions must be >= 1");
    }
    const std::size_t n = matrix.n_points();
    const std::size_t m = n / config.decimation_factor;
    if (m < 10) {
        throw Error("subset too small: N=" + std::to_string(n) + " / decimation " +
                    std::to_string(config.decimation_factor) + " = " + std::to_string(m) + " < 10 points");
    }

    // Every repetition of a full-size subset sees the same data.
    const std::size_t distinct = (m == n) ? 1 : config.repetitions;
    std::vector<IdEstimate> runs(distinct);
    const KnnOptions inner{.workers = distinct > 1 ? 1U : config.workers};
    parallel_for(distinct, distinct > 1 ? config.workers : 1U, [&](std::size_t rep) {
        const auto seed = derive_stream_seed(config.seed, config.decimation_factor, rep);
        const auto indices = draw_subset(n, m, seed);
        const NeighborIndex index = (m == n) ? knn(matrix, 2, {}, nullptr, inner)
                                             : knn(matrix.subset(indices), 2, {}, nullptr, inner);
        runs[rep] = fit(mu_ratios(index), config);
    });

    if (config.repetitions == 1 || distinct == 1) {
        IdEstimate est = runs.front();
        est.scale = m;
        est.repetitions = config.repetitions;
        if (distinct == 1 && config.repetitions > 1) {
            est.uncertainty = 0.0;
        }
        return est;
    }

    IdEstimate est;
    est.method = config.method;
    est.scale = m;
    est.repetitions = config.repetitions;
    est.n_used = runs.front().n_used;
    double sum = 0.0;
    for (const auto& r : runs) {
        sum += r.d;
        est.n_used = std::min(est.n_used, r.n_used);
        est.n_dropped_duplicates = std::max(est.n_dropped_duplicates, r.n_dropped_duplicates);
    }
    est.d = sum / static_cast<double>(runs.size());
    double ss = 0.0;
    for (const auto& r : runs) {
        ss += (r.d - est.d) * (r.d - est.d);
    }
    est.uncertainty = std::sqrt(ss / static_cast<double>(runs.size() - 1));
    return est;
}

ScaleProfile multiscale_id(const RepresentationMatrix& matrix, IdMethod method, std::size_t max_halvings,
                           std::size_t repetitions, std::uint64_t seed, double discard_fraction, unsigned workers) {
    if (max_halvings >= 63) {
        throw Error("too many halvings");
    }
    const std::size_t smallest = matrix.n_points() >> max_halvings;
    if (smallest < 10) {
        throw Error("subset too small: N / 2^" + std::to_string(max_halvings) + " = " + std::to_string(smallest) +
                    " < 10 points");
    }
    ScaleProfile profile;
    for (std::size_t j = 0; j <= max_halvings; ++j) {
        IdConfig config;
        config.method = method;
        config.decimation_factor = std::size_t{1} << j;
        config.repetitions = repetitions;
        config.seed = seed;
        config.discard_fraction = discard_fraction;
        config.workers = workers;
        const IdEstimate est = estimate_id(matrix, config);
        profile.scales.push_back({est.scale, est.d, est.repetitions > 1 ? est.uncertainty : 0.0, est.repetitions});
    }
    return profile;
}

ScaleWindow find_scale_plateau(const ScaleProfile& profile, double threshold) {
    const auto& s = profile.scales;
    if (s.empty()) {
        throw Error("empty scale profile");
    }
    ScaleWindow best{0, 0, 0.0};
    for (std::size_t first = 0; first < s.size(); ++first) {
        double lo = s[first].mean_d;
        double hi = s[first].mean_d;
        for (std::size_t last = first; last < s.size(); ++last) {
            lo = std::min(lo, s[last].mean_d);
            hi = std::max(hi, s[last].mean_d);
            const double variation = (hi - lo) / lo;
            if (!(variation < threshold)) {
                break;
            }
            if (last - first > best.last - best.first) {
                best = {first, last, variation};
            }
        }
    }
    return best;
}

std::vector<LayerIdPoint> layer_id_profile(const LayerStack& stack, const IdConfig& config) {
    if (stack.layers.empty()) {
        throw Error("layer stack is empty");
    }
    std::vector<LayerIdPoint> out(stack.layers.size());
    IdConfig inner = config;
    const bool across_layers = stack.layers.size() > 1;
    if (across_layers) {
        inner.workers = 1;
    }
    parallel_for(stack.layers.size(), across_layers ? config.workers : 1U, [&](std::size_t l) {
        const auto& layer = stack.layers[l];
        out[l] = {layer.layer_id(), layer.relative_depth(), estimate_id(layer, inner)};
    });
    return out;
}

}  // namespace repgeom
