#include "repgeom/error.hpp"
#include "repgeom/id_twonn.hpp"
#include "repgeom/profiles.hpp"
#include "repgeom/synth.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace repgeom;

namespace {

ManifoldSpec spec(ManifoldKind kind, std::size_t d, std::size_t embed, std::size_t n, std::uint64_t seed = 1) {
    ManifoldSpec s;
    s.kind = kind;
    s.d_intrinsic = d;
    s.d_embed = embed;
    s.n_points = n;
    s.seed = seed;
    return s;
}

double twonn(const RepresentationMatrix& m) {
    return estimate_id(m, {}).d;
}

}  // namespace

TEST_CASE("synth: determinism and shapes") {
    for (const auto kind :
         {ManifoldKind::hypercube, ManifoldKind::hypersphere, ManifoldKind::swiss_roll, ManifoldKind::gaussian_blobs}) {
        auto s = spec(kind, 2, 7, 300, 9);
        s.noise_sigma = 0.01;
        const auto a = generate(s);
        CHECK(a.n_points() == 300);
        CHECK(a.n_dims() == 7);
        CHECK(a == generate(s));
        s.seed = 10;
        CHECK_FALSE(a == generate(s));
        CHECK(parse_manifold_kind(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(generate(spec(ManifoldKind::swiss_roll, 3, 5, 100)), Error);
    CHECK_THROWS_AS(generate(spec(ManifoldKind::hypersphere, 4, 4, 100)), Error);
    CHECK_THROWS_AS(generate(spec(ManifoldKind::hypercube, 5, 4, 100)), Error);
    CHECK_THROWS_AS(parse_manifold_kind("torus"), Error);
}

TEST_CASE("synth: embedding is an isometry") {
    const auto flat = generate(spec(ManifoldKind::hypercube, 3, 3, 200, 4));
    const auto frame = random_orthonormal_frame(40, 3, 2);
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            double dot = 0.0;
            for (std::size_t r = 0; r < 40; ++r) {
                dot += frame[r * 3 + a] * frame[r * 3 + b];
            }
            CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-12));
        }
    }
    const auto high = generate(spec(ManifoldKind::hypercube, 3, 40, 200, 4));
    // same seed draws the same intrinsic points; pairwise distances survive the embedding
    for (std::size_t i = 1; i < 20; ++i) {
        double d_flat = 0.0;
        double d_high = 0.0;
        for (std::size_t t = 0; t < 3; ++t) {
            d_flat += std::pow(flat.at(i, t) - flat.at(0, t), 2);
        }
        for (std::size_t t = 0; t < 40; ++t) {
            d_high += std::pow(high.at(i, t) - high.at(0, t), 2);
        }
        CHECK(std::sqrt(d_high) == doctest::Approx(std::sqrt(d_flat)).epsilon(1e-5));
    }
}

TEST_CASE("synth: known intrinsic dimension") {
    CHECK(std::abs(twonn(generate(spec(ManifoldKind::hypercube, 2, 2, 8192))) - 2.0) <= 0.2);
    CHECK(std::abs(twonn(generate(spec(ManifoldKind::hypersphere, 9, 50, 10000))) - 9.0) <= 0.9);
    CHECK(std::abs(twonn(generate(spec(ManifoldKind::swiss_roll, 2, 10, 8192))) - 2.0) <= 0.2);
    const double d5 = twonn(generate(spec(ManifoldKind::hypercube, 5, 50, 10000)));
    CHECK(std::abs(d5 - 5.0) / 5.0 <= 0.10);
}

TEST_CASE("synth: embedding dimension does not change the estimate") {
    const double a = twonn(generate(spec(ManifoldKind::hypercube, 5, 5, 4000, 3)));
    const double b = twonn(generate(spec(ManifoldKind::hypercube, 5, 50, 4000, 3)));
    const double c = twonn(generate(spec(ManifoldKind::hypercube, 5, 500, 4000, 3)));
    CHECK(std::abs(b - a) / a <= 0.10);
    CHECK(std::abs(c - a) / a <= 0.10);
}

TEST_CASE("synth: planted stack") {
    const auto p = planted_stack(8, 3, 10, 100, 0);
    CHECK(p.stack.size() == 8);
    CHECK(p.stack.n_points() == 1000);
    CHECK(p.labels.size() == 1000);
    CHECK(p.labels.n_classes(0) == 10);
    CHECK(p.semantic_layer == 3);
    CHECK(p.layer_dims.size() == 8);
    CHECK(p.stack.total_blocks == 7);
    CHECK(p.stack.layers.back().relative_depth() == 1.0);
    for (std::size_t l = 0; l < 8; ++l) {
        if (l != 3) {
            CHECK(p.layer_dims[l] > p.layer_dims[3]);
        }
    }

    const auto again = planted_stack(8, 3, 10, 100, 0);
    for (std::size_t l = 0; l < 8; ++l) {
        CHECK(again.stack.layers[l] == p.stack.layers[l]);
    }

    std::vector<double> ids;
    for (const auto& pt : layer_id_profile(p.stack, {})) {
        ids.push_back(pt.estimate.d);
    }
    for (std::size_t l = 0; l < 8; ++l) {
        if (l != 3) {
            CHECK(ids[l] > ids[3]);
        }
    }
    CHECK(select_semantic_layer(ids).index == 3);

    CHECK_THROWS_AS(planted_stack(8, 0, 10, 100, 0), Error);
    CHECK_THROWS_AS(planted_stack(8, 7, 10, 100, 0), Error);
}

TEST_CASE("synth: earliest and latest legal planted layer") {
    for (const std::size_t planted : {1u, 6u}) {
        const auto p = planted_stack(8, planted, 10, 100, 5);
        std::vector<double> ids;
        for (const auto& pt : layer_id_profile(p.stack, {})) {
            ids.push_back(pt.estimate.d);
        }
        CAPTURE(planted);
        const auto sel = select_semantic_layer(ids);
        CHECK(sel.index == planted);
    }
}
