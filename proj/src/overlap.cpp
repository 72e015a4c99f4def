#include "repgeom/overlap.hpp"

#include "repgeom/error.hpp"
#include "repgeom/parallel.hpp"

#include <algorithm>
#include <numeric>

namespace repgeom {

std::string_view to_string(OverlapKind kind) {
    switch (kind) {
        case OverlapKind::layer_layer:
            return "layer-layer";
        case OverlapKind::ground_truth:
            return "ground-truth";
        case OverlapKind::remote_homology:
            return "remote-homology";
    }
    return "unknown";
}

HomologyExclusion parse_homology_exclusion(std::string_view name) {
    if (name == "filter") {
        return HomologyExclusion::filter;
    }
    if (name == "postfilter") {
        return HomologyExclusion::postfilter;
    }
    throw Error("unknown exclusion mode '" + std::string(name) + "' (expected filter or postfilter)");
}

OverlapValue overlap_between(const NeighborIndex& a, const NeighborIndex& b) {
    if (a.n_points() != b.n_points()) {
        throw Error("overlap needs matching point counts, got " + std::to_string(a.n_points()) + " and " +
                    std::to_string(b.n_points()));
    }
    if (a.k() != b.k()) {
        throw Error("overlap needs matching k, got " + std::to_string(a.k()) + " and " + std::to_string(b.k()));
    }
    const std::size_t n = a.n_points();
    const std::size_t k = a.k();
    if (n == 0 || k == 0) {
        throw Error("overlap of an empty neighbor index");
    }
    std::size_t shared = 0;
    std::vector<std::uint32_t> sa(k);
    std::vector<std::uint32_t> sb(k);
    for (std::size_t i = 0; i < n; ++i) {
        const auto na = a.neighbors(i);
        const auto nb = b.neighbors(i);
        std::copy(na.begin(), na.end(), sa.begin());
        std::copy(nb.begin(), nb.end(), sb.begin());
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        std::size_t p = 0;
        std::size_t q = 0;
        while (p < k && q < k) {
            if (sa[p] < sb[q]) {
                ++p;
            } else if (sb[q] < sa[p]) {
                ++q;
            } else {
                ++shared;
                ++p;
                ++q;
            }
        }
    }
    // Integer total keeps the value independent of summation order; a == b gives exactly 1.
    return {static_cast<double>(shared) / (static_cast<double>(n) * static_cast<double>(k)), k,
            OverlapKind::layer_layer};
}

OverlapValue overlap_ground_truth(const NeighborIndex& index, const LabelTable& labels, std::string_view level) {
    if (labels.size() != index.n_points()) {
        throw Error("labels misaligned: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(index.n_points()) + " points");
    }
    const auto& codes = labels.codes(level);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < index.n_points(); ++i) {
        for (const auto j : index.neighbors(i)) {
            agree += codes[j] == codes[i] ? 1 : 0;
        }
    }
    return {static_cast<double>(agree) / (static_cast<double>(index.n_points()) * static_cast<double>(index.k())),
            index.k(), OverlapKind::ground_truth};
}

OverlapValue remote_homology_overlap(const RepresentationMatrix& matrix, const LabelTable& labels,
                                     const RemoteHomologyOptions& options) {
    if (labels.size() != matrix.n_points()) {
        throw Error("labels misaligned: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(matrix.n_points()) + " points");
    }
    const auto& coarse = labels.codes(options.coarse_level);
    const auto& fine = labels.codes(options.fine_level);

    if (options.exclusion == HomologyExclusion::filter) {
        const NeighborIndex index =
            knn(matrix, options.k, ExclusionRule::same_label(options.fine_level), &labels, options.knn);
        OverlapValue v = overlap_ground_truth(index, labels, options.coarse_level);
        v.kind = OverlapKind::remote_homology;
        return v;
    }

    const NeighborIndex index = knn(matrix, options.k, {}, nullptr, options.knn);
    double sum = 0.0;
    std::size_t scored = 0;
    for (std::size_t i = 0; i < index.n_points(); ++i) {
        std::size_t kept = 0;
        std::size_t agree = 0;
        for (const auto j : index.neighbors(i)) {
            if (fine[j] == fine[i]) {
                continue;
            }
            ++kept;
            agree += coarse[j] == coarse[i] ? 1 : 0;
        }
        if (kept > 0) {
            sum += static_cast<double>(agree) / static_cast<double>(kept);
            ++scored;
        }
    }
    if (scored == 0) {
        throw Error("postfilter remote homology: every neighbor of every point is in its own " + options.fine_level);
    }
    return {sum / static_cast<double>(scored), options.k, OverlapKind::remote_homology};
}

std::vector<DepthOverlap> consecutive_overlaps(const LayerStack& stack, const std::vector<NeighborIndex>& indexes) {
    if (stack.layers.size() < 2) {
        throw Error("consecutive overlaps need at least 2 layers");
    }
    if (indexes.size() != stack.layers.size()) {
        throw Error("one neighbor index per layer required");
    }
    std::vector<DepthOverlap> out;
    out.reserve(stack.layers.size() - 1);
    for (std::size_t l = 0; l + 1 < stack.layers.size(); ++l) {
        out.push_back({stack.layers[l].layer_id(), stack.layers[l].relative_depth(),
                       overlap_between(indexes[l], indexes[l + 1])});
    }
    return out;
}

std::vector<DepthOverlap> consecutive_overlaps(const LayerStack& stack, std::size_t k, const KnnOptions& options) {
    if (stack.layers.size() < 2) {
        throw Error("consecutive overlaps need at least 2 layers");
    }
    std::vector<NeighborIndex> indexes(stack.layers.size());
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        indexes[l] = knn(stack.layers[l], k, {}, nullptr, options);
    }
    return consecutive_overlaps(stack, indexes);
}

}  // namespace repgeom
