#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace repgeom {

/// One layer's pooled activations: N points x d dims, row-major float32.
///
/// Shape is checked on construction (N >= 3, d >= 1, values.size() == N*d).
/// Finiteness is checked by check_finite(), which the readers and writers call.
class RepresentationMatrix {
public:
    RepresentationMatrix() = default;
    RepresentationMatrix(std::size_t n_points, std::size_t n_dims, std::vector<float> values,
                         std::uint32_t layer_id = 0, double relative_depth = 0.0);

    std::size_t n_points() const noexcept { return n_points_; }
    std::size_t n_dims() const noexcept { return n_dims_; }
    std::uint32_t layer_id() const noexcept { return layer_id_; }
    double relative_depth() const noexcept { return relative_depth_; }

    void set_layer(std::uint32_t layer_id, double relative_depth);

    std::span<const float> values() const noexcept { return values_; }
    std::span<const float> row(std::size_t i) const noexcept {
        return {values_.data() + i * n_dims_, n_dims_};
    }
    float at(std::size_t i, std::size_t j) const noexcept { return values_[i * n_dims_ + j]; }

    /// Throws "non-finite value at (row,col)" for the first NaN/Inf found.
    void check_finite() const;

    /// Rows `indices` in the given order, keeping layer metadata.
    RepresentationMatrix subset(std::span<const std::size_t> indices) const;

    /// Every coordinate multiplied by `factor`.
    RepresentationMatrix scaled(double factor) const;

    friend bool operator==(const RepresentationMatrix&, const RepresentationMatrix&) = default;

private:
    std::size_t n_points_ = 0;
    std::size_t n_dims_ = 0;
    std::vector<float> values_;
    std::uint32_t layer_id_ = 0;
    double relative_depth_ = 0.0;
};

/// Ordered layers sharing one point set.
struct LayerStack {
    std::vector<RepresentationMatrix> layers;
    std::vector<std::string> point_ids;
    std::uint32_t total_blocks = 0;

    std::size_t n_points() const noexcept { return point_ids.size(); }
    std::size_t size() const noexcept { return layers.size(); }

    /// Checks identical N across layers, matching point_ids and strictly increasing layer ids.
    void validate() const;
};

/// Per-point categorical labels with one column per level (coarse to fine).
class LabelTable {
public:
    LabelTable() = default;
    /// `rows[i][l]` is the label of point i at level l.
    LabelTable(std::vector<std::string> point_ids, std::vector<std::string> levels,
               std::vector<std::vector<std::string>> rows);

    std::size_t size() const noexcept { return point_ids_.size(); }
    const std::vector<std::string>& point_ids() const noexcept { return point_ids_; }
    const std::vector<std::string>& levels() const noexcept { return levels_; }

    bool has_level(std::string_view name) const;
    std::size_t level_index(std::string_view name) const;

    const std::string& label(std::size_t point, std::size_t level) const { return rows_[point][level]; }

    /// Dense integer codes for one level, numbered by first appearance.
    const std::vector<std::int32_t>& codes(std::size_t level) const { return codes_[level]; }
    const std::vector<std::int32_t>& codes(std::string_view level) const {
        return codes_[level_index(level)];
    }
    std::size_t n_classes(std::size_t level) const { return n_classes_[level]; }

    /// Reorders rows to follow `ids`. The id sets must match exactly.
    LabelTable aligned_to(std::span<const std::string> ids) const;

private:
    void build_codes();

    std::vector<std::string> point_ids_;
    std::vector<std::string> levels_;
    std::vector<std::vector<std::string>> rows_;
    std::vector<std::vector<std::int32_t>> codes_;
    std::vector<std::size_t> n_classes_;
};

inline constexpr std::size_t kContainerHeaderBytes = 44;

void write_matrix(const RepresentationMatrix& matrix, const std::filesystem::path& path,
                  std::uint32_t total_blocks = 0);
RepresentationMatrix read_matrix(const std::filesystem::path& path);

/// Header fields of a container without reading the payload.
struct ContainerHeader {
    std::uint32_t n_points = 0;
    std::uint32_t n_dims = 0;
    std::uint32_t layer_id = 0;
    std::uint32_t total_blocks = 0;
};
ContainerHeader read_header(const std::filesystem::path& path);

/// Manifest: line-oriented text, see README for the grammar.
struct Manifest {
    std::uint32_t total_blocks = 0;
    std::vector<std::filesystem::path> layer_paths;  // as written (relative to the manifest)
    std::filesystem::path point_ids_path;            // empty: ids are "0".."N-1"
};

Manifest parse_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& manifest_path);

LayerStack load_stack(const std::filesystem::path& manifest_path);

/// Writes one container per layer, a point-id file and the manifest into `dir`.
std::filesystem::path save_stack(const LayerStack& stack, const std::filesystem::path& dir);

/// Reads a TSV with header `id<TAB>level...`, keeping only `level_names` (in that order).
LabelTable read_labels(const std::filesystem::path& path, std::span<const std::string> level_names);
void write_labels(const LabelTable& labels, const std::filesystem::path& path);

}  // namespace repgeom
