#include "repgeom/neighbors.hpp"

#include "repgeom/error.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <fstream>

namespace fs = std::filesystem;

namespace repgeom {

namespace {

// Header mirrors the container layout: magic, version, rule mode, reserved,
// N, k, digest (u64), level-name length, reserved up to 44 bytes.
constexpr std::array<unsigned char, 4> kCacheMagic{'R', 'P', 'G', 'N'};
constexpr std::uint8_t kCacheVersion = 1;
constexpr std::size_t kCacheHeaderBytes = 44;

void put_le(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) {
        out.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xFFU));
    }
}

std::uint64_t get_le(const unsigned char* in, int bytes) {
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) {
        v |= static_cast<std::uint64_t>(in[b]) << (8 * b);
    }
    return v;
}

}  // namespace

std::uint64_t matrix_digest(const RepresentationMatrix& matrix) {
    // FNV-1a over the shape and the little-endian payload.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto mix = [&h](std::uint64_t v, int bytes) {
        for (int b = 0; b < bytes; ++b) {
            h ^= (v >> (8 * b)) & 0xFFU;
            h *= 0x100000001b3ULL;
        }
    };
    mix(matrix.n_points(), 8);
    mix(matrix.n_dims(), 8);
    for (const float v : matrix.values()) {
        mix(std::bit_cast<std::uint32_t>(v), 4);
    }
    return h;
}

void write_neighbor_cache(const NeighborIndex& index, std::uint64_t digest, const ExclusionRule& rule,
                          const fs::path& path) {
    std::vector<unsigned char> buf;
    buf.reserve(kCacheHeaderBytes + rule.level_name.size() + index.all_ids().size() * 8);
    buf.insert(buf.end(), kCacheMagic.begin(), kCacheMagic.end());
    buf.push_back(kCacheVersion);
    buf.push_back(rule.mode == ExclusionMode::none ? 0 : 1);
    put_le(buf, 0, 2);
    put_le(buf, index.n_points(), 4);
    put_le(buf, index.k(), 4);
    put_le(buf, digest, 8);
    put_le(buf, rule.level_name.size(), 4);
    buf.resize(kCacheHeaderBytes, 0);
    buf.insert(buf.end(), rule.level_name.begin(), rule.level_name.end());
    for (const auto id : index.all_ids()) {
        put_le(buf, id, 4);
    }
    for (const auto dist : index.all_distances()) {
        put_le(buf, std::bit_cast<std::uint32_t>(static_cast<float>(dist)), 4);
    }

    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot open " + tmp.string() + " for writing");
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!out) {
            throw Error("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::optional<NeighborIndex> read_neighbor_cache(const fs::path& path, std::uint64_t digest, std::size_t k,
                                                 const ExclusionRule& rule) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::array<unsigned char, kCacheHeaderBytes> header{};
    in.read(reinterpret_cast<char*>(header.data()), header.size());
    if (in.gcount() != static_cast<std::streamsize>(header.size()) ||
        !std::equal(kCacheMagic.begin(), kCacheMagic.end(), header.begin()) || header[4] != kCacheVersion) {
        return std::nullopt;
    }
    const std::uint8_t mode = header[5];
    const std::size_t n = get_le(&header[8], 4);
    const std::size_t stored_k = get_le(&header[12], 4);
    const std::uint64_t stored_digest = get_le(&header[16], 8);
    const std::size_t name_len = get_le(&header[24], 4);
    if (stored_digest != digest || stored_k != k || mode != (rule.mode == ExclusionMode::none ? 0 : 1)) {
        return std::nullopt;
    }
    std::string level(name_len, '\0');
    in.read(level.data(), static_cast<std::streamsize>(name_len));
    if (level != rule.level_name) {
        return std::nullopt;
    }
    std::vector<unsigned char> body(n * k * 8);
    in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(body.size()));
    if (static_cast<std::size_t>(in.gcount()) != body.size()) {
        throw Error(path.string() + ": truncated neighbor cache");
    }
    std::vector<std::uint32_t> ids(n * k);
    std::vector<double> dist(n * k);
    for (std::size_t i = 0; i < n * k; ++i) {
        ids[i] = static_cast<std::uint32_t>(get_le(&body[i * 4], 4));
        dist[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(&body[(n * k + i) * 4], 4)));
    }
    return NeighborIndex(n, k, std::move(ids), std::move(dist));
}

NeighborIndex cached_knn(const RepresentationMatrix& matrix, std::size_t k, const ExclusionRule& rule,
                         const LabelTable* labels, const fs::path& cache_dir, const KnnOptions& options) {
    if (cache_dir.empty()) {
        return knn(matrix, k, rule, labels, options);
    }
    std::uint64_t digest = matrix_digest(matrix);
    // Exclusion results also depend on the labels.
    for (const auto code : detail::exclusion_codes(matrix, rule, labels)) {
        digest ^= static_cast<std::uint32_t>(code) + 0x9e3779b97f4a7c15ULL + (digest << 6) + (digest >> 2);
    }
    char name[96];
    std::snprintf(name, sizeof(name), "%016llx_k%zu_%s.rpgn", static_cast<unsigned long long>(digest), k,
                  rule.mode == ExclusionMode::none ? "none" : "excl");
    const fs::path path = cache_dir / name;
    if (auto hit = read_neighbor_cache(path, digest, k, rule)) {
        return *std::move(hit);
    }
    NeighborIndex index = knn(matrix, k, rule, labels, options);
    fs::create_directories(cache_dir);
    write_neighbor_cache(index, digest, rule, path);
    return index;
}

}  // namespace repgeom
