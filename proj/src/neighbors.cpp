#include "repgeom/neighbors.hpp"

#include "repgeom/error.hpp"
#include "repgeom/parallel.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>

namespace repgeom {

NeighborIndex::NeighborIndex(std::size_t n_points, std::size_t k, std::vector<std::uint32_t> ids,
                             std::vector<double> distances)
    : n_points_(n_points), k_(k), ids_(std::move(ids)), distances_(std::move(distances)) {
    if (ids_.size() != n_points_ * k_ || distances_.size() != n_points_ * k_) {
        throw Error("neighbor index arrays do not match N*k");
    }
}

NeighborIndex NeighborIndex::truncated(std::size_t k) const {
    if (k > k_) {
        throw Error("cannot truncate a k=" + std::to_string(k_) + " index to k=" + std::to_string(k));
    }
    std::vector<std::uint32_t> ids(n_points_ * k);
    std::vector<double> dist(n_points_ * k);
    for (std::size_t i = 0; i < n_points_; ++i) {
        std::copy_n(ids_.begin() + static_cast<std::ptrdiff_t>(i * k_), k, ids.begin() + static_cast<std::ptrdiff_t>(i * k));
        std::copy_n(distances_.begin() + static_cast<std::ptrdiff_t>(i * k_), k,
                    dist.begin() + static_cast<std::ptrdiff_t>(i * k));
    }
    return {n_points_, k, std::move(ids), std::move(dist)};
}

namespace detail {

std::vector<std::int32_t> exclusion_codes(const RepresentationMatrix& matrix, const ExclusionRule& rule,
                                          const LabelTable* labels) {
    if (rule.mode == ExclusionMode::none) {
        return {};
    }
    if (labels == nullptr) {
        throw Error("same-label exclusion on '" + rule.level_name + "' requires a label table");
    }
    if (labels->size() != matrix.n_points()) {
        throw Error("labels misaligned: " + std::to_string(labels->size()) + " labels for " +
                    std::to_string(matrix.n_points()) + " points");
    }
    return labels->codes(rule.level_name);
}

void check_candidate_counts(std::size_t n_points, std::size_t k, std::span<const std::int32_t> codes,
                            const LabelTable* labels, const ExclusionRule& rule) {
    if (k < 1) {
        throw Error("k must be at least 1");
    }
    if (codes.empty()) {
        if (k > n_points - 1) {
            throw Error("k=" + std::to_string(k) + " exceeds N-1=" + std::to_string(n_points - 1));
        }
        return;
    }
    std::unordered_map<std::int32_t, std::size_t> class_size;
    for (const auto c : codes) {
        ++class_size[c];
    }
    for (std::size_t i = 0; i < n_points; ++i) {
        const std::size_t admissible = n_points - class_size[codes[i]];
        if (admissible < k) {
            const std::size_t level = labels->level_index(rule.level_name);
            throw Error("query " + std::to_string(i) + " ('" + labels->point_ids()[i] + "', " + rule.level_name +
                        " '" + labels->label(i, level) + "') has only " + std::to_string(admissible) +
                        " admissible candidates for k=" + std::to_string(k));
        }
    }
}

}  // namespace detail

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double direct_distance(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        const double diff = static_cast<double>(a[t]) - static_cast<double>(b[t]);
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

struct Candidate {
    double value;
    std::uint32_t id;
};

// Keeps every candidate whose screened distance is within `slack` of the current
// k-th smallest, so the exact top k always survive screening errors.
class SlackTopK {
public:
    SlackTopK(std::size_t k, double slack) : k_(k), slack_(slack) { kept_.reserve(4 * k + 64); }

    void offer(double value, std::uint32_t id) {
        if (heap_.size() < k_) {
            heap_.push(value);
            kept_.push_back({value, id});
            return;
        }
        const double kth = heap_.top();
        if (value > kth + slack_) {
            return;
        }
        kept_.push_back({value, id});
        if (value < kth) {
            heap_.pop();
            heap_.push(value);
        }
        if (kept_.size() > 4 * k_ + 64) {
            prune();
        }
    }

    std::vector<Candidate>& finish() {
        prune();
        return kept_;
    }

private:
    void prune() {
        if (heap_.size() < k_) {
            return;
        }
        const double limit = heap_.top() + slack_;
        std::erase_if(kept_, [limit](const Candidate& c) { return c.value > limit; });
    }

    std::size_t k_;
    double slack_;
    std::priority_queue<double> heap_;
    std::vector<Candidate> kept_;
};

}  // namespace

NeighborIndex knn(const RepresentationMatrix& matrix, std::size_t k, const ExclusionRule& rule,
                  const LabelTable* labels, const KnnOptions& options) {
    const std::size_t n = matrix.n_points();
    const std::size_t d = matrix.n_dims();
    const std::vector<std::int32_t> codes = detail::exclusion_codes(matrix, rule, labels);
    detail::check_candidate_counts(n, k, codes, labels, rule);

    // Centered copy in double: translation does not change distances and keeps the
    // norm expansion well conditioned.
    RowMatrix x(n, d);
    {
        std::vector<double> mean(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = matrix.row(i);
            for (std::size_t t = 0; t < d; ++t) {
                mean[t] += r[t];
            }
        }
        for (auto& m : mean) {
            m /= static_cast<double>(n);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = matrix.row(i);
            for (std::size_t t = 0; t < d; ++t) {
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = r[t] - mean[t];
            }
        }
    }
    const Eigen::VectorXd sq_norms = x.rowwise().squaredNorm();
    const double max_sq_norm = sq_norms.maxCoeff();
    // Bound on |screened - true| squared distance, with a generous safety factor.
    const double eps = std::numeric_limits<double>::epsilon();
    const double slack_scale = 16.0 * (static_cast<double>(d) + 4.0) * eps;

    const std::size_t qb = std::max<std::size_t>(1, options.query_block);
    const std::size_t rb = std::max<std::size_t>(1, options.ref_block);
    const std::size_t n_tasks = (n + qb - 1) / qb;

    std::vector<std::uint32_t> out_ids(n * k);
    std::vector<double> out_dist(n * k);

    parallel_for(n_tasks, options.workers, [&](std::size_t task) {
        const std::size_t q0 = task * qb;
        const std::size_t nq = std::min(qb, n - q0);

        std::vector<SlackTopK> tops;
        tops.reserve(nq);
        for (std::size_t a = 0; a < nq; ++a) {
            const double slack = slack_scale * (sq_norms[static_cast<Eigen::Index>(q0 + a)] + max_sq_norm) +
                                 std::numeric_limits<double>::min();
            tops.emplace_back(k, slack);
        }

        RowMatrix gram(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(rb));
        for (std::size_t r0 = 0; r0 < n; r0 += rb) {
            const std::size_t nr = std::min(rb, n - r0);
            auto g = gram.leftCols(static_cast<Eigen::Index>(nr));
            g.noalias() = x.middleRows(static_cast<Eigen::Index>(q0), static_cast<Eigen::Index>(nq)) *
                          x.middleRows(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(nr)).transpose();
            for (std::size_t a = 0; a < nq; ++a) {
                const std::size_t q = q0 + a;
                const double qn = sq_norms[static_cast<Eigen::Index>(q)];
                const std::int32_t q_code = codes.empty() ? 0 : codes[q];
                auto& top = tops[a];
                for (std::size_t b = 0; b < nr; ++b) {
                    const std::size_t r = r0 + b;
                    if (r == q || (!codes.empty() && codes[r] == q_code)) {
                        continue;
                    }
                    double s = qn + sq_norms[static_cast<Eigen::Index>(r)] -
                               2.0 * g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                    s = std::max(s, 0.0);
                    top.offer(s, static_cast<std::uint32_t>(r));
                }
            }
        }

        for (std::size_t a = 0; a < nq; ++a) {
            const std::size_t q = q0 + a;
            auto& kept = tops[a].finish();
            const auto qrow = matrix.row(q);
            for (auto& c : kept) {
                c.value = direct_distance(qrow, matrix.row(c.id));
            }
            const auto by_distance_then_id = [](const Candidate& lhs, const Candidate& rhs) {
                return lhs.value < rhs.value || (lhs.value == rhs.value && lhs.id < rhs.id);
            };
            std::partial_sort(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(k), kept.end(),
                              by_distance_then_id);
            for (std::size_t j = 0; j < k; ++j) {
                out_ids[q * k + j] = kept[j].id;
                out_dist[q * k + j] = kept[j].value;
            }
        }
    });

    return {n, k, std::move(out_ids), std::move(out_dist)};
}

}  // namespace repgeom
