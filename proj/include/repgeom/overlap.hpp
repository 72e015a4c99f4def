#pragma once

#include "repgeom/neighbors.hpp"
#include "repgeom/tensor_store.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace repgeom {

enum class OverlapKind { layer_layer, ground_truth, remote_homology };

std::string_view to_string(OverlapKind kind);

struct OverlapValue {
    double value = 0.0;  // in [0, 1]
    std::size_t k = 0;
    OverlapKind kind = OverlapKind::layer_layer;
};

/// Mean over points of |N_a(i) ∩ N_b(i)| / k.
OverlapValue overlap_between(const NeighborIndex& a, const NeighborIndex& b);

/// Mean over points of the fraction of neighbors sharing the point's label at `level`.
OverlapValue overlap_ground_truth(const NeighborIndex& index, const LabelTable& labels, std::string_view level);

/// How the same-family neighbors are removed for the remote-homology probe.
enum class HomologyExclusion {
    filter,      // search only among out-of-family points; always exactly k neighbors
    postfilter,  // take the plain k nearest, then drop same-family ones
};

HomologyExclusion parse_homology_exclusion(std::string_view name);

struct RemoteHomologyOptions {
    std::size_t k = 10;
    std::string coarse_level = "superfamily";
    std::string fine_level = "family";
    HomologyExclusion exclusion = HomologyExclusion::filter;
    KnnOptions knn;
};

/// Superfamily consistency of neighbors found outside each point's own family.
///
/// With postfilter, each point scores over its surviving neighbors and points with
/// none left are skipped.
OverlapValue remote_homology_overlap(const RepresentationMatrix& matrix, const LabelTable& labels,
                                     const RemoteHomologyOptions& options = {});

struct DepthOverlap {
    std::uint32_t layer_id = 0;  // first layer of the pair
    double relative_depth = 0.0;
    OverlapValue overlap;
};

/// chi^{l,l+1} for each adjacent pair of the stack.
std::vector<DepthOverlap> consecutive_overlaps(const LayerStack& stack, std::size_t k = 30,
                                               const KnnOptions& options = {});

/// Same, from neighbor indexes already computed per layer.
std::vector<DepthOverlap> consecutive_overlaps(const LayerStack& stack, const std::vector<NeighborIndex>& indexes);

}  // namespace repgeom
