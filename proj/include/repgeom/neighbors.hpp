#pragma once

#include "repgeom/tensor_store.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace repgeom {

enum class ExclusionMode { none, same_label };

/// Which candidates a query may not take as neighbors (besides itself).
struct ExclusionRule {
    ExclusionMode mode = ExclusionMode::none;
    std::string level_name;

    static ExclusionRule none() { return {}; }
    static ExclusionRule same_label(std::string level) {
        return {ExclusionMode::same_label, std::move(level)};
    }

    friend bool operator==(const ExclusionRule&, const ExclusionRule&) = default;
};

/// Per-point ordered k nearest neighbors with Euclidean distances.
///
/// Rows are sorted by (distance, neighbor index); a point never lists itself.
class NeighborIndex {
public:
    NeighborIndex() = default;
    NeighborIndex(std::size_t n_points, std::size_t k, std::vector<std::uint32_t> ids,
                  std::vector<double> distances);

    std::size_t n_points() const noexcept { return n_points_; }
    std::size_t k() const noexcept { return k_; }

    std::span<const std::uint32_t> neighbors(std::size_t i) const noexcept {
        return {ids_.data() + i * k_, k_};
    }
    std::span<const double> distances(std::size_t i) const noexcept {
        return {distances_.data() + i * k_, k_};
    }
    std::span<const std::uint32_t> all_ids() const noexcept { return ids_; }
    std::span<const double> all_distances() const noexcept { return distances_; }

    /// First `k` columns of this index (rows stay sorted).
    NeighborIndex truncated(std::size_t k) const;

    friend bool operator==(const NeighborIndex&, const NeighborIndex&) = default;

private:
    std::size_t n_points_ = 0;
    std::size_t k_ = 0;
    std::vector<std::uint32_t> ids_;
    std::vector<double> distances_;
};

struct KnnOptions {
    unsigned workers = 0;           // 0: REPGEOM_THREADS / hardware concurrency
    std::size_t query_block = 128;  // rows per task
    std::size_t ref_block = 1024;   // reference rows per distance tile
};

/// Exact k nearest neighbors under Euclidean distance.
///
/// Candidates are screened tile by tile with ||a||^2 + ||b||^2 - 2 a.b in double
/// precision, keeping every candidate within a rounding-error bound of the current
/// k-th best. Survivors are re-ranked on the directly evaluated distance
/// sqrt(sum (a_t - b_t)^2), so the result equals knn_oracle bit for bit and does
/// not depend on the worker count or tile sizes.
///
/// `labels` must be aligned to the matrix rows when the rule is same_label.
NeighborIndex knn(const RepresentationMatrix& matrix, std::size_t k, const ExclusionRule& rule = {},
                  const LabelTable* labels = nullptr, const KnnOptions& options = {});

/// O(N^2) reference: full distance matrix, then a sort of every row.
NeighborIndex knn_oracle(const RepresentationMatrix& matrix, std::size_t k, const ExclusionRule& rule = {},
                         const LabelTable* labels = nullptr);

// On-disk cache of neighbor indexes keyed by (matrix digest, k, rule).

std::uint64_t matrix_digest(const RepresentationMatrix& matrix);

void write_neighbor_cache(const NeighborIndex& index, std::uint64_t digest, const ExclusionRule& rule,
                          const std::filesystem::path& path);

/// Returns nullopt if the file is missing or was written for a different key.
std::optional<NeighborIndex> read_neighbor_cache(const std::filesystem::path& path, std::uint64_t digest,
                                                 std::size_t k, const ExclusionRule& rule);

/// knn() through a cache directory; an empty directory path disables caching.
NeighborIndex cached_knn(const RepresentationMatrix& matrix, std::size_t k, const ExclusionRule& rule,
                         const LabelTable* labels, const std::filesystem::path& cache_dir,
                         const KnnOptions& options = {});

namespace detail {

/// Label codes for the rule's level (empty when the rule is none); validates alignment.
std::vector<std::int32_t> exclusion_codes(const RepresentationMatrix& matrix, const ExclusionRule& rule,
                                          const LabelTable* labels);

/// Throws if some query has fewer than k admissible candidates.
void check_candidate_counts(std::size_t n_points, std::size_t k, std::span<const std::int32_t> codes,
                            const LabelTable* labels, const ExclusionRule& rule);

}  // namespace detail

}  // namespace repgeom
