#include "repgeom/tensor_store.hpp"

#include "repgeom/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace fs = std::filesystem;

namespace repgeom {

// ---------------------------------------------------------------------------
// RepresentationMatrix

RepresentationMatrix::RepresentationMatrix(std::size_t n_points, std::size_t n_dims,
                                           std::vector<float> values, std::uint32_t layer_id,
                                           double relative_depth)
    : n_points_(n_points),
      n_dims_(n_dims),
      values_(std::move(values)),
      layer_id_(layer_id),
      relative_depth_(relative_depth) {
    if (n_points_ < 3) {
        throw Error("representation matrix needs at least 3 points, got " + std::to_string(n_points_));
    }
    if (n_dims_ < 1) {
        throw Error("representation matrix needs at least 1 dimension");
    }
    if (values_.size() != n_points_ * n_dims_) {
        throw Error("representation matrix has " + std::to_string(values_.size()) +
                    " values, expected " + std::to_string(n_points_ * n_dims_));
    }
}

void RepresentationMatrix::set_layer(std::uint32_t layer_id, double relative_depth) {
    layer_id_ = layer_id;
    relative_depth_ = relative_depth;
}

void RepresentationMatrix::check_finite() const {
    for (std::size_t idx = 0; idx < values_.size(); ++idx) {
        if (!std::isfinite(values_[idx])) {
            throw Error("non-finite value at (" + std::to_string(idx / n_dims_) + "," +
                        std::to_string(idx % n_dims_) + ")");
        }
    }
}

RepresentationMatrix RepresentationMatrix::subset(std::span<const std::size_t> indices) const {
    std::vector<float> out;
    out.reserve(indices.size() * n_dims_);
    for (const std::size_t i : indices) {
        if (i >= n_points_) {
            throw Error("subset index " + std::to_string(i) + " out of range");
        }
        const auto r = row(i);
        out.insert(out.end(), r.begin(), r.end());
    }
    return {indices.size(), n_dims_, std::move(out), layer_id_, relative_depth_};
}

RepresentationMatrix RepresentationMatrix::scaled(double factor) const {
    std::vector<float> out(values_.size());
    std::transform(values_.begin(), values_.end(), out.begin(),
                   [factor](float v) { return static_cast<float>(v * factor); });
    return {n_points_, n_dims_, std::move(out), layer_id_, relative_depth_};
}

// ---------------------------------------------------------------------------
// LayerStack

void LayerStack::validate() const {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].n_points() != point_ids.size()) {
            throw Error("point-count mismatch: layer " + std::to_string(layers[l].layer_id()) +
                        " has " + std::to_string(layers[l].n_points()) + " points, expected " +
                        std::to_string(point_ids.size()));
        }
        if (l > 0 && layers[l].layer_id() <= layers[l - 1].layer_id()) {
            if (layers[l].layer_id() == layers[l - 1].layer_id()) {
                throw Error("duplicate layer_id " + std::to_string(layers[l].layer_id()));
            }
            throw Error("layer_ids must be strictly increasing");
        }
    }
}

// ---------------------------------------------------------------------------
// LabelTable

LabelTable::LabelTable(std::vector<std::string> point_ids, std::vector<std::string> levels,
                       std::vector<std::vector<std::string>> rows)
    : point_ids_(std::move(point_ids)), levels_(std::move(levels)), rows_(std::move(rows)) {
    if (rows_.size() != point_ids_.size()) {
        throw Error("label table has " + std::to_string(rows_.size()) + " rows for " +
                    std::to_string(point_ids_.size()) + " ids");
    }
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < point_ids_.size(); ++i) {
        if (!seen.insert(point_ids_[i]).second) {
            throw Error("duplicate point id '" + point_ids_[i] + "'");
        }
        if (rows_[i].size() != levels_.size()) {
            throw Error("label row for '" + point_ids_[i] + "' has " + std::to_string(rows_[i].size()) +
                        " fields, expected " + std::to_string(levels_.size()));
        }
        for (std::size_t l = 0; l < levels_.size(); ++l) {
            if (rows_[i][l].empty()) {
                throw Error("empty label for '" + point_ids_[i] + "' at level '" + levels_[l] + "'");
            }
        }
    }
    build_codes();
}

void LabelTable::build_codes() {
    codes_.assign(levels_.size(), std::vector<std::int32_t>(rows_.size()));
    n_classes_.assign(levels_.size(), 0);
    for (std::size_t l = 0; l < levels_.size(); ++l) {
        std::unordered_map<std::string, std::int32_t> dict;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            auto [it, inserted] = dict.try_emplace(rows_[i][l], static_cast<std::int32_t>(dict.size()));
            codes_[l][i] = it->second;
        }
        n_classes_[l] = dict.size();
    }
}

bool LabelTable::has_level(std::string_view name) const {
    return std::find(levels_.begin(), levels_.end(), name) != levels_.end();
}

std::size_t LabelTable::level_index(std::string_view name) const {
    const auto it = std::find(levels_.begin(), levels_.end(), name);
    if (it == levels_.end()) {
        throw Error("unknown label level '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - levels_.begin());
}

LabelTable LabelTable::aligned_to(std::span<const std::string> ids) const {
    std::unordered_map<std::string, std::size_t> position;
    position.reserve(point_ids_.size());
    for (std::size_t i = 0; i < point_ids_.size(); ++i) {
        position.emplace(point_ids_[i], i);
    }
    std::vector<std::vector<std::string>> rows;
    rows.reserve(ids.size());
    for (const auto& id : ids) {
        const auto it = position.find(id);
        if (it == position.end()) {
            throw Error("label table has no entry for point id '" + id + "'");
        }
        rows.push_back(rows_[it->second]);
    }
    if (ids.size() != point_ids_.size()) {
        std::unordered_set<std::string> wanted(ids.begin(), ids.end());
        for (const auto& id : point_ids_) {
            if (!wanted.contains(id)) {
                throw Error("label table id '" + id + "' is not a point of the stack");
            }
        }
    }
    return {std::vector<std::string>(ids.begin(), ids.end()), levels_, std::move(rows)};
}

// ---------------------------------------------------------------------------
// Container format

namespace {

constexpr std::array<char, 4> kMagic{'R', 'P', 'G', 'M'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kDtypeReal32 = 1;

void put_u32(unsigned char* out, std::uint32_t v) {
    out[0] = static_cast<unsigned char>(v & 0xFFU);
    out[1] = static_cast<unsigned char>((v >> 8) & 0xFFU);
    out[2] = static_cast<unsigned char>((v >> 16) & 0xFFU);
    out[3] = static_cast<unsigned char>((v >> 24) & 0xFFU);
}

std::uint32_t get_u32(const unsigned char* in) {
    return static_cast<std::uint32_t>(in[0]) | (static_cast<std::uint32_t>(in[1]) << 8) |
           (static_cast<std::uint32_t>(in[2]) << 16) | (static_cast<std::uint32_t>(in[3]) << 24);
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > 0xFFFFFFFFULL) {
        throw Error(std::string(what) + " does not fit the container header");
    }
    return static_cast<std::uint32_t>(v);
}

ContainerHeader parse_header(const std::array<unsigned char, kContainerHeaderBytes>& raw,
                             const fs::path& path) {
    if (!std::equal(kMagic.begin(), kMagic.end(), raw.begin(),
                    [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; })) {
        throw Error(path.string() + ": not a repgeom container");
    }
    if (raw[4] != kVersion) {
        throw Error(path.string() + ": container version " + std::to_string(raw[4]) +
                    " not supported (expected " + std::to_string(kVersion) + ")");
    }
    if (raw[5] != kDtypeReal32) {
        throw Error(path.string() + ": unsupported dtype code " + std::to_string(raw[5]));
    }
    ContainerHeader h;
    h.n_points = get_u32(&raw[8]);
    h.n_dims = get_u32(&raw[12]);
    h.layer_id = get_u32(&raw[16]);
    h.total_blocks = get_u32(&raw[20]);
    return h;
}

std::array<unsigned char, kContainerHeaderBytes> read_raw_header(std::ifstream& in, const fs::path& path) {
    std::array<unsigned char, kContainerHeaderBytes> raw{};
    in.read(reinterpret_cast<char*>(raw.data()), raw.size());
    if (in.gcount() < 4) {
        throw Error(path.string() + ": not a repgeom container");
    }
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        // magic check first so short garbage files report the right thing
        parse_header(raw, path);
        throw Error(path.string() + ": truncated header");
    }
    return raw;
}

}  // namespace

void write_matrix(const RepresentationMatrix& matrix, const fs::path& path, std::uint32_t total_blocks) {
    matrix.check_finite();

    std::array<unsigned char, kContainerHeaderBytes> header{};
    std::copy(kMagic.begin(), kMagic.end(), header.begin());
    header[4] = kVersion;
    header[5] = kDtypeReal32;
    put_u32(&header[8], checked_u32(matrix.n_points(), "N"));
    put_u32(&header[12], checked_u32(matrix.n_dims(), "d"));
    put_u32(&header[16], matrix.layer_id());
    put_u32(&header[20], total_blocks);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(header.data()), header.size());

    const auto values = matrix.values();
    std::vector<unsigned char> payload(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        put_u32(&payload[i * 4], std::bit_cast<std::uint32_t>(values[i]));
    }
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) {
        throw Error("write failed for " + path.string());
    }
}

ContainerHeader read_header(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return parse_header(read_raw_header(in, path), path);
}

RepresentationMatrix read_matrix(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    const ContainerHeader h = parse_header(read_raw_header(in, path), path);

    const std::size_t count = static_cast<std::size_t>(h.n_points) * h.n_dims;
    std::vector<unsigned char> payload(count * 4);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
        throw Error(path.string() + ": expected " + std::to_string(h.n_points) + "*" +
                    std::to_string(h.n_dims) + "*4 = " + std::to_string(payload.size()) +
                    " payload bytes, found " + std::to_string(in.gcount()));
    }
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        values[i] = std::bit_cast<float>(get_u32(&payload[i * 4]));
    }
    const double depth = h.total_blocks > 0 ? static_cast<double>(h.layer_id) / h.total_blocks : 0.0;
    RepresentationMatrix m(h.n_points, h.n_dims, std::move(values), h.layer_id, depth);
    m.check_finite();
    return m;
}

// ---------------------------------------------------------------------------
// Manifest

Manifest parse_manifest(const fs::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) {
        throw Error("cannot open manifest " + manifest_path.string());
    }
    Manifest m;
    bool have_total = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        std::istringstream fields(line.substr(first));
        std::string key;
        fields >> key;
        std::string rest;
        std::getline(fields >> std::ws, rest);
        while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\t')) {
            rest.pop_back();
        }
        const std::string where = manifest_path.string() + ":" + std::to_string(line_no) + ": ";
        if (rest.empty()) {
            throw Error(where + "missing value for '" + key + "'");
        }
        if (key == "total_blocks") {
            try {
                std::size_t used = 0;
                const long v = std::stol(rest, &used);
                if (used != rest.size() || v < 1) {
                    throw Error("");
                }
                m.total_blocks = static_cast<std::uint32_t>(v);
            } catch (const std::exception&) {
                throw Error(where + "total_blocks must be a positive integer, got '" + rest + "'");
            }
            have_total = true;
        } else if (key == "layer") {
            m.layer_paths.emplace_back(rest);
        } else if (key == "point_ids") {
            m.point_ids_path = rest;
        } else {
            throw Error(where + "unknown key '" + key + "'");
        }
    }
    if (!have_total) {
        throw Error(manifest_path.string() + ": missing total_blocks");
    }
    if (m.layer_paths.empty()) {
        throw Error(manifest_path.string() + ": no layer entries");
    }
    return m;
}

void write_manifest(const Manifest& manifest, const fs::path& manifest_path) {
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + manifest_path.string() + " for writing");
    }
    out << "# repgeom layer stack manifest\n";
    out << "total_blocks " << manifest.total_blocks << "\n";
    if (!manifest.point_ids_path.empty()) {
        out << "point_ids " << manifest.point_ids_path.generic_string() << "\n";
    }
    for (const auto& p : manifest.layer_paths) {
        out << "layer " << p.generic_string() << "\n";
    }
    if (!out) {
        throw Error("write failed for " + manifest_path.string());
    }
}

namespace {

std::vector<std::string> read_point_ids(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("missing point id file " + path.string());
    }
    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (!seen.insert(line).second) {
            throw Error(path.string() + ": duplicate point id '" + line + "'");
        }
        ids.push_back(line);
    }
    return ids;
}

}  // namespace

LayerStack load_stack(const fs::path& manifest_path) {
    const Manifest manifest = parse_manifest(manifest_path);
    const fs::path base = manifest_path.parent_path();

    LayerStack stack;
    stack.total_blocks = manifest.total_blocks;
    std::set<std::uint32_t> seen_ids;
    for (const auto& rel : manifest.layer_paths) {
        const fs::path p = rel.is_absolute() ? rel : base / rel;
        if (!fs::exists(p)) {
            throw Error("missing layer file " + p.string());
        }
        const ContainerHeader h = read_header(p);
        if (h.total_blocks != 0 && h.total_blocks != manifest.total_blocks) {
            throw Error(p.string() + ": container total_blocks " + std::to_string(h.total_blocks) +
                        " disagrees with manifest total_blocks " + std::to_string(manifest.total_blocks));
        }
        if (h.layer_id > manifest.total_blocks) {
            throw Error(p.string() + ": layer_id " + std::to_string(h.layer_id) + " exceeds total_blocks " +
                        std::to_string(manifest.total_blocks));
        }
        if (!seen_ids.insert(h.layer_id).second) {
            throw Error("duplicate layer_id " + std::to_string(h.layer_id) + " in " + manifest_path.string());
        }
        if (!stack.layers.empty() && h.n_points != stack.layers.front().n_points()) {
            throw Error("point-count mismatch: " + p.string() + " has N=" + std::to_string(h.n_points) +
                        ", expected " + std::to_string(stack.layers.front().n_points()));
        }
        RepresentationMatrix m = read_matrix(p);
        m.set_layer(h.layer_id, static_cast<double>(h.layer_id) / manifest.total_blocks);
        stack.layers.push_back(std::move(m));
    }

    const std::size_t n = stack.layers.front().n_points();
    if (manifest.point_ids_path.empty()) {
        stack.point_ids.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            stack.point_ids.push_back(std::to_string(i));
        }
    } else {
        const fs::path p = manifest.point_ids_path.is_absolute() ? manifest.point_ids_path
                                                                 : base / manifest.point_ids_path;
        stack.point_ids = read_point_ids(p);
        if (stack.point_ids.size() != n) {
            throw Error("point-count mismatch: " + p.string() + " lists " +
                        std::to_string(stack.point_ids.size()) + " ids for N=" + std::to_string(n));
        }
    }
    stack.validate();
    return stack;
}

fs::path save_stack(const LayerStack& stack, const fs::path& dir) {
    stack.validate();
    fs::create_directories(dir);
    Manifest manifest;
    manifest.total_blocks = stack.total_blocks;
    manifest.point_ids_path = "point_ids.txt";
    {
        std::ofstream ids(dir / manifest.point_ids_path, std::ios::trunc);
        for (const auto& id : stack.point_ids) {
            ids << id << "\n";
        }
        if (!ids) {
            throw Error("write failed for " + (dir / manifest.point_ids_path).string());
        }
    }
    for (const auto& layer : stack.layers) {
        char name[32];
        std::snprintf(name, sizeof(name), "layer_%03u.rpgm", layer.layer_id());
        write_matrix(layer, dir / name, stack.total_blocks);
        manifest.layer_paths.emplace_back(name);
    }
    const fs::path manifest_path = dir / "manifest.txt";
    write_manifest(manifest, manifest_path);
    return manifest_path;
}

// ---------------------------------------------------------------------------
// Labels

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) {
            return out;
        }
        start = tab + 1;
    }
}

}  // namespace

LabelTable read_labels(const fs::path& path, std::span<const std::string> level_names) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open label file " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(path.string() + ": empty label file (header row required)");
    }
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    const auto header = split_tabs(line);
    if (header.empty() || header[0] != "id") {
        throw Error(path.string() + ": header must start with an 'id' column");
    }
    std::vector<std::size_t> columns;
    for (const auto& name : level_names) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw Error(path.string() + ": missing column '" + name + "'");
        }
        columns.push_back(static_cast<std::size_t>(it - header.begin()));
    }

    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> rows;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() != header.size()) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        if (!seen.insert(fields[0]).second) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": duplicate point id '" + fields[0] + "'");
        }
        std::vector<std::string> row;
        row.reserve(columns.size());
        for (const auto c : columns) {
            if (fields[c].empty()) {
                throw Error(path.string() + ":" + std::to_string(line_no) + ": empty label in column '" +
                            header[c] + "'");
            }
            row.push_back(std::move(fields[c]));
        }
        ids.push_back(std::move(fields[0]));
        rows.push_back(std::move(row));
    }
    return {std::move(ids), std::vector<std::string>(level_names.begin(), level_names.end()), std::move(rows)};
}

void write_labels(const LabelTable& labels, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out << "id";
    for (const auto& level : labels.levels()) {
        out << '\t' << level;
    }
    out << '\n';
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << labels.point_ids()[i];
        for (std::size_t l = 0; l < labels.levels().size(); ++l) {
            out << '\t' << labels.label(i, l);
        }
        out << '\n';
    }
    if (!out) {
        throw Error("write failed for " + path.string());
    }
}

}  // namespace repgeom
