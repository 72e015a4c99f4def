#include "repgeom/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace repgeom {

NeighborIndex knn_oracle(const RepresentationMatrix& matrix, std::size_t k, const ExclusionRule& rule,
                         const LabelTable* labels) {
    const std::size_t n = matrix.n_points();
    const std::size_t d = matrix.n_dims();
    const std::vector<std::int32_t> codes = detail::exclusion_codes(matrix, rule, labels);
    detail::check_candidate_counts(n, k, codes, labels, rule);

    // Full symmetric distance matrix by direct differences.
    std::vector<double> full(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = static_cast<double>(matrix.at(i, t)) - static_cast<double>(matrix.at(j, t));
                acc += diff * diff;
            }
            full[i * n + j] = full[j * n + i] = std::sqrt(acc);
        }
    }

    std::vector<std::uint32_t> ids(n * k);
    std::vector<double> dist(n * k);
    std::vector<std::uint32_t> order;
    for (std::size_t i = 0; i < n; ++i) {
        order.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && (codes.empty() || codes[j] != codes[i])) {
                order.push_back(static_cast<std::uint32_t>(j));
            }
        }
        const double* row = &full[i * n];
        std::stable_sort(order.begin(), order.end(),
                         [row](std::uint32_t a, std::uint32_t b) { return row[a] < row[b]; });
        for (std::size_t j = 0; j < k; ++j) {
            ids[i * k + j] = order[j];
            dist[i * k + j] = row[order[j]];
        }
    }
    return {n, k, std::move(ids), std::move(dist)};
}

}  // namespace repgeom
