#pragma once

#include "repgeom/tensor_store.hpp"

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace repgeom {

enum class ManifoldKind { hypercube, hypersphere, swiss_roll, gaussian_blobs };

std::string_view to_string(ManifoldKind kind);
ManifoldKind parse_manifold_kind(std::string_view name);

struct ManifoldSpec {
    ManifoldKind kind = ManifoldKind::hypercube;
    std::size_t d_intrinsic = 2;
    std::size_t d_embed = 2;
    std::size_t n_points = 1000;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_blobs = 4;  // gaussian-blobs only

    /// Coordinates the manifold needs before embedding (d+1 for a d-sphere, 3 for the roll).
    std::size_t source_dims() const;
    void validate() const;
};

/// Samples the manifold, maps it isometrically into d_embed dimensions with a
/// seeded random orthonormal frame plus offset, then adds isotropic noise.
RepresentationMatrix generate(const ManifoldSpec& spec);

/// `rows` x `cols` matrix with orthonormal columns (QR of a Gaussian matrix).
std::vector<double> random_orthonormal_frame(std::size_t rows, std::size_t cols, std::uint64_t seed);

struct PlantedStack {
    LayerStack stack;
    LabelTable labels;                  // single level "class"
    std::vector<std::size_t> layer_dims;  // intrinsic dimension used for each layer
    std::vector<double> class_signal;     // class-center scale per layer
    std::size_t semantic_layer = 0;
};

/// A stack whose layer `semantic_layer` holds every class as a tight 2-D cluster
/// (lowest ID, perfectly label-consistent) while the other layers are noisier,
/// higher-dimensional Gaussian embeddings with weaker class signal. The ID targets
/// rise to a peak just before the planted layer and climb again after it.
PlantedStack planted_stack(std::size_t n_layers, std::size_t semantic_layer, std::size_t n_classes,
                           std::size_t n_per_class, std::uint64_t seed);

}  // namespace repgeom
