#include "repgeom/error.hpp"
#include "repgeom/id_twonn.hpp"
#include "repgeom/synth.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace repgeom;

namespace {

MuSample sample_of(std::vector<double> mu) {
    return {std::move(mu), 0};
}

RepresentationMatrix noisy_helix(std::size_t n, double noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, noise);
    std::vector<float> v;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 4.0 * std::numbers::pi * u(rng);
        v.push_back(static_cast<float>(std::cos(t) + g(rng)));
        v.push_back(static_cast<float>(std::sin(t) + g(rng)));
        v.push_back(static_cast<float>(0.3 * t + g(rng)));
    }
    return {n, 3, std::move(v)};
}

RepresentationMatrix manifold(ManifoldKind kind, std::size_t d, std::size_t embed, std::size_t n,
                              std::uint64_t seed) {
    ManifoldSpec s;
    s.kind = kind;
    s.d_intrinsic = d;
    s.d_embed = embed;
    s.n_points = n;
    s.seed = seed;
    return generate(s);
}

}  // namespace

TEST_CASE("mu ratios") {
    const NeighborIndex idx(3, 2, {1, 2, 0, 2, 0, 1}, {1, 2, 2, 4, 1, 3});
    const auto s = mu_ratios(idx);
    CHECK(s.values == std::vector<double>{2, 2, 3});
    CHECK(s.n_dropped_duplicates == 0);

    const NeighborIndex dup(3, 2, {1, 2, 0, 2, 0, 1}, {0, 1, 2, 4, 1, 3});
    const auto d = mu_ratios(dup);
    CHECK(d.values == std::vector<double>{2, 3});
    CHECK(d.n_dropped_duplicates == 1);

    const NeighborIndex all_dup(3, 2, {1, 2, 0, 2, 0, 1}, {0, 1, 0, 4, 0, 3});
    CHECK_THROWS_WITH_AS(mu_ratios(all_dup), doctest::Contains("no valid ratios"), Error);

    const NeighborIndex k1(3, 1, {1, 0, 1}, {1, 1, 2});
    CHECK_THROWS_AS(mu_ratios(k1), Error);
}

TEST_CASE("mle: closed form cases") {
    const auto a = twonn_mle(sample_of({2, 2, 2, 2}));
    CHECK(std::abs(a.d - 1.0 / std::numbers::ln2) <= 1e-12);
    CHECK(a.n_used == 4);
    CHECK(a.uncertainty == doctest::Approx(a.d / 2.0));

    const double e = std::numbers::e;
    CHECK(std::abs(twonn_mle(sample_of({e, e, e})).d - 1.0) <= 1e-15);

    CHECK_THROWS_WITH_AS(twonn_mle(sample_of({1, 1, 1})), doctest::Contains("degenerate ratios"), Error);
    CHECK_THROWS_AS(twonn_mle(sample_of({})), Error);
}

TEST_CASE("mle: d * sum(ln mu) = n for any sample") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 5 + rng() % 2000;
        const auto mu = testing::pareto_ratios(n, 1.0 + (rng() % 100) / 10.0, rng());
        const auto est = twonn_mle(sample_of(mu));
        double s = 0.0;
        for (const double m : mu) {
            s += std::log(m);
        }
        CHECK(est.d * s == doctest::Approx(static_cast<double>(n)).epsilon(1e-13));
    }
}

TEST_CASE("mle and regression on Pareto samples") {
    const auto mu7 = testing::pareto_ratios(10000, 7.0, 11);
    CHECK(std::abs(twonn_mle(sample_of(mu7)).d - 7.0) <= 0.25);

    const auto mu5 = testing::pareto_ratios(10000, 5.0, 12);
    CHECK(std::abs(twonn_regression(sample_of(mu5), 0.1).d - 5.0) <= 0.25);

    // discard 0 regression agrees with MLE within 5%
    for (const double d0 : {2.0, 5.0, 9.0}) {
        const auto mu = testing::pareto_ratios(10000, d0, 13);
        const double mle = twonn_mle(sample_of(mu)).d;
        const double reg = twonn_regression(sample_of(mu), 0.0).d;
        CHECK(std::abs(reg - mle) / mle <= 0.05);
    }
}

TEST_CASE("estimators converge with sample size") {
    for (const double d0 : {3.0, 6.0}) {
        double err_mle[2];
        double err_reg[2];
        int slot = 0;
        for (const std::size_t n : {1000u, 10000u}) {
            // average the error over several seeds so the comparison is not a coin flip
            double em = 0.0;
            double er = 0.0;
            for (std::uint64_t seed = 0; seed < 8; ++seed) {
                const auto mu = testing::pareto_ratios(n, d0, 100 + seed);
                em += std::abs(twonn_mle(sample_of(mu)).d - d0);
                er += std::abs(twonn_regression(sample_of(mu), 0.1).d - d0);
            }
            err_mle[slot] = em;
            err_reg[slot] = er;
            ++slot;
        }
        CHECK(err_mle[1] < err_mle[0]);
        CHECK(err_reg[1] < err_reg[0]);
    }
}

TEST_CASE("regression: collinear construction gives the slope exactly") {
    const std::size_t n = 100;
    std::vector<double> mu;
    for (std::size_t i = 1; i <= n; ++i) {
        // the last rank has y = inf and never enters the fit
        const double y = i < n ? -std::log(1.0 - static_cast<double>(i) / n) : 10.0;
        mu.push_back(std::exp(y / 3.0));
    }
    const auto est = twonn_regression(sample_of(mu), 0.0);
    CHECK(est.d == doctest::Approx(3.0).epsilon(1e-13));
    CHECK(est.n_used == n - 1);
}

TEST_CASE("regression: four equal ratios, three usable ranks") {
    const auto est = twonn_regression(sample_of({2, 2, 2, 2}), 0.0);
    // sum x*y / sum x^2 with x = ln 2 and y = ln(4/3), ln 2, ln 4
    const double x = std::log(2.0);
    const double sxy = x * std::log(4.0 / 3.0) + x * std::log(2.0) + x * std::log(4.0);
    const double expected = sxy / (3.0 * x * x);
    CHECK(est.d == doctest::Approx(expected).epsilon(1e-14));
    CHECK(est.d == doctest::Approx(std::log(32.0 / 3.0) / (3.0 * std::log(2.0))).epsilon(1e-14));
    CHECK(est.n_used == 3);

    CHECK_THROWS_AS(twonn_regression(sample_of({2, 2}), 0.0), Error);
    CHECK_THROWS_AS(twonn_regression(sample_of({2, 2, 2, 2}), 1.0), Error);
}

TEST_CASE("subset drawing") {
    const auto s = draw_subset(100, 25, 7);
    CHECK(s.size() == 25);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
    CHECK(s == draw_subset(100, 25, 7));
    CHECK(s != draw_subset(100, 25, 8));
    const auto all = draw_subset(10, 10, 3);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(all[i] == i);
    }
    CHECK(derive_stream_seed(0, 4, 0) != derive_stream_seed(0, 4, 1));
    CHECK(derive_stream_seed(0, 4, 0) != derive_stream_seed(0, 2, 0));
    CHECK(derive_stream_seed(0, 4, 0) != derive_stream_seed(1, 4, 0));
}

TEST_CASE("estimate_id: hypercube d=5 in 50-D") {
    const auto m = manifold(ManifoldKind::hypercube, 5, 50, 8192, 21);
    const auto est = estimate_id(m, {});
    CHECK(std::abs(est.d - 5.0) <= 0.5);
    CHECK(est.scale == 2048);
    CHECK(est.repetitions == 5);
    CHECK(est.uncertainty > 0.0);
    CHECK(est.n_used == 2048);
}

TEST_CASE("estimate_id: factor 1, one repetition reduces to a single fit") {
    const auto m = testing::gaussian_matrix(500, 6, 3);
    IdConfig c;
    c.decimation_factor = 1;
    c.repetitions = 1;
    const auto est = estimate_id(m, c);
    const auto direct = twonn_mle(mu_ratios(knn(m, 2)));
    CHECK(est.d == direct.d);
    CHECK(est.uncertainty == direct.uncertainty);
    CHECK(est.scale == 500);

    c.method = IdMethod::regression;
    CHECK(estimate_id(m, c).d == twonn_regression(mu_ratios(knn(m, 2)), 0.1).d);
}

TEST_CASE("estimate_id: determinism, scale and isometry invariance") {
    const auto m = testing::gaussian_matrix(1200, 7, 9);
    IdConfig c;
    c.seed = 42;
    c.workers = 1;
    const auto base = estimate_id(m, c);
    for (unsigned w : {2u, 5u}) {
        c.workers = w;
        const auto again = estimate_id(m, c);
        CHECK(again.d == base.d);
        CHECK(again.uncertainty == base.uncertainty);
    }
    // powers of two scale float32 coordinates exactly
    for (const double f : {0.0078125, 4.0, 1024.0}) {
        CHECK(std::abs(estimate_id(m.scaled(f), c).d - base.d) <= 1e-9 * base.d);
    }
    // other factors round every stored coordinate to float32 (relative 6e-8)
    for (const double f : {0.01, 3.0, 1000.0}) {
        CHECK(std::abs(estimate_id(m.scaled(f), c).d - base.d) <= 1e-5 * base.d);
    }

    const auto q = random_orthonormal_frame(7, 7, 5);
    std::vector<float> rotated(m.values().size());
    for (std::size_t i = 0; i < m.n_points(); ++i) {
        for (std::size_t r = 0; r < 7; ++r) {
            double s = 10.0;
            for (std::size_t k = 0; k < 7; ++k) {
                s += q[r * 7 + k] * m.at(i, k);
            }
            rotated[i * 7 + r] = static_cast<float>(s);
        }
    }
    // float32 storage of the rotated points perturbs each ratio by ~1e-7
    CHECK(std::abs(estimate_id(RepresentationMatrix(m.n_points(), 7, rotated), c).d - base.d) <= 1e-5 * base.d);

    c.seed = 43;
    CHECK(estimate_id(m, c).d != base.d);
}

TEST_CASE("estimate_id: errors and duplicates") {
    const auto m = testing::gaussian_matrix(30, 3, 1);
    CHECK_THROWS_WITH_AS(estimate_id(m, {}), doctest::Contains("subset too small"), Error);

    auto rows = std::vector<std::vector<float>>{};
    for (int i = 0; i < 40; ++i) {
        const int v = i < 20 ? i % 10 : i;
        rows.push_back({static_cast<float>(v), static_cast<float>(v * v % 7)});
    }
    IdConfig c;
    c.decimation_factor = 1;
    c.repetitions = 1;
    const auto est = estimate_id(testing::from_rows(rows), c);
    CHECK(est.n_dropped_duplicates == 20);
    CHECK(est.n_used == 20);
}

TEST_CASE("multiscale: subset sizes halve") {
    const auto m = testing::gaussian_matrix(80, 3, 2);
    const auto p = multiscale_id(m, IdMethod::mle, 3, 2, 0);
    REQUIRE(p.scales.size() == 4);
    CHECK(p.scales[0].subset_size == 80);
    CHECK(p.scales[1].subset_size == 40);
    CHECK(p.scales[2].subset_size == 20);
    CHECK(p.scales[3].subset_size == 10);
    CHECK_THROWS_AS(multiscale_id(m, IdMethod::mle, 4, 2, 0), Error);
}

TEST_CASE("multiscale: uniform 5-D data has a plateau across all scales") {
    const auto m = manifold(ManifoldKind::hypercube, 5, 5, 16384, 31);
    const auto p = multiscale_id(m, IdMethod::mle, 4, 5, 0);
    for (const auto& s : p.scales) {
        CHECK(std::abs(s.mean_d - 5.0) <= 0.5);
    }
    const auto w = find_scale_plateau(p);
    CHECK(w.first == 0);
    CHECK(w.last == 4);
}

TEST_CASE("multiscale: noise inflates the estimate at the finest scale") {
    // the finest length scale is probed by the largest subset
    const auto m = noisy_helix(8192, 0.0002, 1);
    const auto p = multiscale_id(m, IdMethod::mle, 5, 5, 1);
    const auto w = find_scale_plateau(p);
    CHECK(p.scales[0].mean_d > 1.4);
    CHECK(w.first > 0);
    for (std::size_t s = w.first; s <= w.last; ++s) {
        CHECK(std::abs(p.scales[s].mean_d - 1.0) <= 0.2);
    }
}

TEST_CASE("plateau search") {
    ScaleProfile p;
    for (const double d : {9.0, 5.0, 5.2, 4.9, 3.0}) {
        p.scales.push_back({0, d, 0.0, 1});
    }
    const auto w = find_scale_plateau(p);
    CHECK(w.first == 1);
    CHECK(w.last == 3);
    CHECK(w.relative_variation == doctest::Approx(0.3 / 4.9));
    CHECK(find_scale_plateau(p, 0.01).first == 0);
}

TEST_CASE("layer profile: identical layers and a [3, 8, 3] hump") {
    const auto base = testing::gaussian_matrix(400, 5, 4);
    LayerStack same;
    same.total_blocks = 3;
    for (std::uint32_t l = 1; l <= 3; ++l) {
        auto m = base;
        m.set_layer(l, l / 3.0);
        same.layers.push_back(std::move(m));
    }
    for (int i = 0; i < 400; ++i) {
        same.point_ids.push_back(std::to_string(i));
    }
    const auto flat = layer_id_profile(same, {});
    CHECK(flat[0].estimate.d == flat[1].estimate.d);
    CHECK(flat[1].estimate.d == flat[2].estimate.d);
    CHECK(flat[2].layer_id == 3);

    LayerStack hump;
    hump.total_blocks = 2;
    const std::size_t dims[] = {3, 8, 3};
    for (std::uint32_t l = 0; l < 3; ++l) {
        auto m = manifold(ManifoldKind::hypersphere, dims[l], 20, 12000, 50 + l);
        m.set_layer(l, l / 2.0);
        hump.layers.push_back(std::move(m));
    }
    for (int i = 0; i < 12000; ++i) {
        hump.point_ids.push_back(std::to_string(i));
    }
    const auto prof = layer_id_profile(hump, {});
    for (std::size_t l = 0; l < 3; ++l) {
        CAPTURE(l);
        CHECK(std::abs(prof[l].estimate.d - static_cast<double>(dims[l])) <= 0.5);
    }
}
