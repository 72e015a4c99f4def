#include "repgeom/synth.hpp"

#include "repgeom/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace repgeom {

std::string_view to_string(ManifoldKind kind) {
    switch (kind) {
        case ManifoldKind::hypercube:
            return "hypercube";
        case ManifoldKind::hypersphere:
            return "hypersphere";
        case ManifoldKind::swiss_roll:
            return "swiss-roll";
        case ManifoldKind::gaussian_blobs:
            return "gaussian-blobs";
    }
    return "unknown";
}

ManifoldKind parse_manifold_kind(std::string_view name) {
    if (name == "hypercube") {
        return ManifoldKind::hypercube;
    }
    if (name == "hypersphere") {
        return ManifoldKind::hypersphere;
    }
    if (name == "swiss-roll") {
        return ManifoldKind::swiss_roll;
    }
    if (name == "gaussian-blobs") {
        return ManifoldKind::gaussian_blobs;
    }
    throw Error("unknown manifold kind '" + std::string(name) + "'");
}

std::size_t ManifoldSpec::source_dims() const {
    switch (kind) {
        case ManifoldKind::hypersphere:
            return d_intrinsic + 1;
        case ManifoldKind::swiss_roll:
            return 3;
        default:
            return d_intrinsic;
    }
}

void ManifoldSpec::validate() const {
    if (d_intrinsic < 1) {
        throw Error("d_intrinsic must be >= 1");
    }
    if (kind == ManifoldKind::swiss_roll && d_intrinsic != 2) {
        throw Error("swiss-roll has intrinsic dimension 2, got " + std::to_string(d_intrinsic));
    }
    if (d_embed < source_dims()) {
        throw Error(std::string(to_string(kind)) + " with d=" + std::to_string(d_intrinsic) + " needs d_embed >= " +
                    std::to_string(source_dims()) + ", got " + std::to_string(d_embed));
    }
    if (n_points < 3) {
        throw Error("n_points must be >= 3");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw Error("noise_sigma must be finite and >= 0");
    }
    if (kind == ManifoldKind::gaussian_blobs && n_blobs < 1) {
        throw Error("gaussian-blobs needs at least one blob");
    }
}

std::vector<double> random_orthonormal_frame(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    if (cols > rows) {
        throw Error("orthonormal frame needs rows >= cols");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
            g(i, j) = gauss(rng);
        }
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            out[i * cols + j] = q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    return out;
}

namespace {

// Maps row-major source points (n x src) through frame (embed x src) plus offset.
std::vector<float> embed_points(const std::vector<double>& source, std::size_t n, std::size_t src,
                                std::size_t embed, std::mt19937_64& rng, double noise_sigma, double offset_scale) {
    const std::vector<double> frame = random_orthonormal_frame(embed, src, rng());
    std::normal_distribution<double> gauss;
    std::vector<double> offset(embed);
    for (auto& o : offset) {
        o = offset_scale * gauss(rng);
    }
    std::vector<float> out(n * embed);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < embed; ++r) {
            double acc = offset[r];
            for (std::size_t c = 0; c < src; ++c) {
                acc += frame[r * src + c] * source[i * src + c];
            }
            if (noise_sigma > 0.0) {
                acc += noise_sigma * gauss(rng);
            }
            out[i * embed + r] = static_cast<float>(acc);
        }
    }
    return out;
}

}  // namespace

RepresentationMatrix generate(const ManifoldSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::size_t n = spec.n_points;
    const std::size_t src = spec.source_dims();
    std::vector<double> source(n * src);

    switch (spec.kind) {
        case ManifoldKind::hypercube:
            for (auto& v : source) {
                v = unit(rng);
            }
            break;
        case ManifoldKind::hypersphere:
            for (std::size_t i = 0; i < n; ++i) {
                double norm2 = 0.0;
                do {
                    norm2 = 0.0;
                    for (std::size_t c = 0; c < src; ++c) {
                        const double g = gauss(rng);
                        source[i * src + c] = g;
                        norm2 += g * g;
                    }
                } while (norm2 == 0.0);
                const double inv = 1.0 / std::sqrt(norm2);
                for (std::size_t c = 0; c < src; ++c) {
                    source[i * src + c] *= inv;
                }
            }
            break;
        case ManifoldKind::swiss_roll:
            for (std::size_t i = 0; i < n; ++i) {
                const double t = 1.5 * std::numbers::pi * (1.0 + 2.0 * unit(rng));
                const double h = 21.0 * unit(rng);
                source[i * src + 0] = t * std::cos(t);
                source[i * src + 1] = h;
                source[i * src + 2] = t * std::sin(t);
            }
            break;
        case ManifoldKind::gaussian_blobs: {
            std::vector<double> centers(spec.n_blobs * src);
            for (auto& c : centers) {
                c = 20.0 * unit(rng) - 10.0;
            }
            std::uniform_int_distribution<std::size_t> which(0, spec.n_blobs - 1);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t b = which(rng);
                for (std::size_t c = 0; c < src; ++c) {
                    source[i * src + c] = centers[b * src + c] + gauss(rng);
                }
            }
            break;
        }
    }

    return {n, spec.d_embed, embed_points(source, n, src, spec.d_embed, rng, spec.noise_sigma, 1.0)};
}

PlantedStack planted_stack(std::size_t n_layers, std::size_t semantic_layer, std::size_t n_classes,
                           std::size_t n_per_class, std::uint64_t seed) {
    if (n_layers < 3 || semantic_layer == 0 || semantic_layer + 1 >= n_layers) {
        throw Error("planted layer index must satisfy 0 < index < n_layers - 1 (got " +
                    std::to_string(semantic_layer) + " of " + std::to_string(n_layers) + ")");
    }
    if (n_classes < 2 || n_per_class < 2) {
        throw Error("planted stack needs at least 2 classes of at least 2 points");
    }

    constexpr std::size_t kLatentDims = 16;
    constexpr std::size_t kCenterDims = 8;
    constexpr std::size_t kEmbedDims = 32;
    constexpr double kPlantedSeparation = 25.0;

    const std::size_t n = n_classes * n_per_class;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;

    std::vector<double> centers(n_classes * kCenterDims);
    for (auto& c : centers) {
        c = gauss(rng);
    }
    std::vector<double> latent(n * kLatentDims);
    for (auto& z : latent) {
        z = gauss(rng);
    }

    PlantedStack out;
    out.semantic_layer = semantic_layer;
    const std::size_t p = semantic_layer;
    for (std::size_t l = 0; l < n_layers; ++l) {
        std::size_t dims = 0;
        if (l == p) {
            dims = 2;
        } else if (l < p) {
            dims = p == 1 ? 14 : 6 + (8 * l) / (p - 1);
        } else {
            dims = std::min<std::size_t>(kLatentDims, 6 + 2 * (l - p - 1));
        }
        out.layer_dims.push_back(dims);
        const double distance = static_cast<double>(l > p ? l - p : p - l);
        out.class_signal.push_back(l == p ? kPlantedSeparation
                                          : 1.0 - 0.5 * distance / static_cast<double>(n_layers));
    }

    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < n; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "p%05zu", i);
        ids.emplace_back(id);
        rows.push_back({"c" + std::to_string(i / n_per_class)});
    }

    LayerStack& stack = out.stack;
    stack.point_ids = ids;
    stack.total_blocks = static_cast<std::uint32_t>(n_layers - 1);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::size_t dims = out.layer_dims[l];
        const std::size_t src = kCenterDims + dims;
        std::vector<double> source(n * src);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t cls = i / n_per_class;
            for (std::size_t c = 0; c < kCenterDims; ++c) {
                source[i * src + c] = out.class_signal[l] * centers[cls * kCenterDims + c];
            }
            for (std::size_t c = 0; c < dims; ++c) {
                source[i * src + kCenterDims + c] = latent[i * kLatentDims + c];
            }
        }
        auto values = embed_points(source, n, src, kEmbedDims, rng, 0.0, 1.0);
        const auto layer_id = static_cast<std::uint32_t>(l);
        stack.layers.emplace_back(n, kEmbedDims, std::move(values), layer_id,
                                  static_cast<double>(layer_id) / stack.total_blocks);
    }
    out.labels = LabelTable(std::move(ids), {"class"}, std::move(rows));
    return out;
}

}  // namespace repgeom
