#include "repgeom/error.hpp"
#include "repgeom/profiles.hpp"
#include "repgeom/report_io.hpp"
#include "repgeom/synth.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <random>

using namespace repgeom;

namespace {

double brute_nn_accuracy(const RepresentationMatrix& m, const std::vector<std::int32_t>& codes,
                         const std::vector<std::int32_t>* excluded) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < m.n_points(); ++i) {
        double best = 0.0;
        std::size_t arg = m.n_points();
        for (std::size_t j = 0; j < m.n_points(); ++j) {
            if (j == i || (excluded != nullptr && (*excluded)[j] == (*excluded)[i])) {
                continue;
            }
            double s = 0.0;
            for (std::size_t t = 0; t < m.n_dims(); ++t) {
                const double diff = static_cast<double>(m.at(i, t)) - static_cast<double>(m.at(j, t));
                s += diff * diff;
            }
            if (arg == m.n_points() || s < best) {
                best = s;
                arg = j;
            }
        }
        hits += codes[arg] == codes[i];
    }
    return static_cast<double>(hits) / static_cast<double>(m.n_points());
}

}  // namespace

TEST_CASE("peak detection examples") {
    const std::vector<double> curve{8, 15, 22, 14, 7, 7.5, 8, 13};
    CHECK(detect_first_peak(curve) == 2u);
    const auto sel = select_semantic_layer(curve);
    CHECK(sel.index == 4);
    CHECK(sel.first_peak == 2u);
    CHECK_FALSE(sel.fallback);

    const std::vector<double> plm{10, 20, 25, 9, 6, 5.5, 5.5, 6, 9, 13};
    CHECK(select_semantic_layer(plm).index == 5);

    const std::vector<double> decreasing{9, 8, 7, 6, 5};
    CHECK_FALSE(detect_first_peak(decreasing).has_value());

    const std::vector<double> twin{1, 10, 1, 10, 1};
    CHECK(detect_first_peak(twin) == 1u);
    CHECK(select_semantic_layer(twin).index == 2);

    const std::vector<double> flat{5, 5, 5, 5, 5};
    const auto f = select_semantic_layer(flat);
    CHECK(f.fallback);
    CHECK(f.index == 1);
    CHECK_FALSE(f.first_peak.has_value());
}

TEST_CASE("peak detection: prominence threshold and endpoints") {
    // a 1-unit bump on a 100-unit range is below 5%
    const std::vector<double> small_bump{0, 100, 50, 51, 50, 40, 60};
    CHECK(detect_first_peak(small_bump) == 1u);
    const std::vector<double> tiny_first{50, 51, 50, 100, 0, 20, 30};
    CHECK(detect_first_peak(tiny_first) == 3u);
    CHECK(peak_prominence(tiny_first, 1) == doctest::Approx(1.0));
    CHECK(peak_prominence(tiny_first, 3) == doctest::Approx(50.0));
    DetectionConfig loose;
    loose.prominence_fraction = 0.005;
    CHECK(detect_first_peak(tiny_first, loose) == 1u);

    const std::vector<double> edge{30, 20, 10, 15, 5};
    CHECK(detect_first_peak(edge) == 3u);
    // a peak right before the last layer leaves nothing to select after it
    const auto sel = select_semantic_layer(edge);
    CHECK(sel.fallback);
    CHECK(sel.index == 2);

    // plateaus are not strict maxima
    const std::vector<double> mesa{1, 5, 5, 1, 0};
    CHECK_FALSE(detect_first_peak(mesa).has_value());
}

TEST_CASE("smoothing") {
    const std::vector<double> c{3, 6, 9, 0, 3};
    CHECK(smooth_curve(c, 1) == c);
    const auto s = smooth_curve(c, 3);
    CHECK(s == std::vector<double>{3, 6, 5, 4, 3});
    const auto s5 = smooth_curve(c, 5);
    CHECK(s5[0] == 3);
    CHECK(s5[1] == 6);
    CHECK(s5[2] == doctest::Approx(4.2));

    DetectionConfig bad;
    bad.smoothing_window = 2;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.smoothing_window = 3;
    bad.prominence_fraction = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);

    // smoothing removes a one-layer spike
    const std::vector<double> spiky{10, 14, 18, 22, 16, 12, 30, 9, 9.5, 12};
    DetectionConfig cfg;
    CHECK(select_semantic_layer(spiky, cfg).first_peak == 3u);
    cfg.smoothing_window = 3;
    const auto sm = select_semantic_layer(spiky, cfg);
    CHECK(sm.first_peak == 3u);
}

TEST_CASE("selection: short curves") {
    const std::vector<double> one{4};
    const auto s1 = select_semantic_layer(one);
    CHECK(s1.index == 0);
    CHECK(s1.fallback);
    const std::vector<double> two{4, 3};
    CHECK(select_semantic_layer(two).index == 1);
    const std::vector<double> three{4, 9, 3};
    const auto s3 = select_semantic_layer(three);
    CHECK(s3.first_peak == 1u);
    CHECK(s3.fallback);
    CHECK(s3.index == 1);
    CHECK_THROWS_AS(select_semantic_layer(std::vector<double>{}), Error);
}

TEST_CASE("selection is invariant under scaling and shifting the curve") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> u(0, 20);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 4 + rng() % 12;
        std::vector<double> curve(n);
        for (auto& v : curve) {
            v = u(rng);
        }
        DetectionConfig cfg;
        cfg.prominence_fraction = 0.037;
        cfg.smoothing_window = trial % 2 == 0 ? 1 : 3;
        const auto base = select_semantic_layer(curve, cfg);
        const auto peak = detect_first_peak(curve, cfg);
        for (const double c : {0.25, 2.0, 1024.0}) {
            std::vector<double> scaled(curve);
            for (auto& v : scaled) {
                v *= c;
            }
            const auto s = select_semantic_layer(scaled, cfg);
            CHECK(s.index == base.index);
            CHECK(s.first_peak == base.first_peak);
            CHECK(detect_first_peak(scaled, cfg) == peak);
        }
        for (const double shift : {-7.0, 3.0, 1000.0}) {
            std::vector<double> shifted(curve);
            for (auto& v : shifted) {
                v += shift;
            }
            const auto s = select_semantic_layer(shifted, cfg);
            CHECK(s.index == base.index);
            CHECK(s.fallback == base.fallback);
            CHECK(detect_first_peak(shifted, cfg) == peak);
        }
        if (!base.fallback) {
            CHECK(*base.first_peak < base.index);
            CHECK(base.index < n - 1);
        }
    }
}

TEST_CASE("1-NN accuracy") {
    const auto line = testing::from_rows({{0}, {1}, {2}, {3}, {4}, {5}});
    CHECK(nn_classification_accuracy(line, testing::single_level_labels({"a", "b", "a", "b", "a", "b"}), "class") ==
          0.0);
    const auto two_groups = testing::from_rows({{0}, {1}, {2}, {10}, {11}, {12}});
    CHECK(nn_classification_accuracy(two_groups, testing::single_level_labels({"a", "a", "a", "b", "b", "b"}),
                                     "class") == 1.0);
    // point 3 sits between 2 and 4; the index tie rule picks 2
    CHECK(nn_classification_accuracy(line, testing::single_level_labels({"a", "a", "a", "b", "b", "b"}), "class") ==
          doctest::Approx(5.0 / 6.0));
    CHECK_THROWS_WITH_AS(
        nn_classification_accuracy(line, testing::single_level_labels({"a", "a", "a", "b", "b", "c"}), "class"),
        doctest::Contains("single member"), Error);

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 15; ++trial) {
        const std::size_t n = 20 + rng() % 300;
        const auto m = trial % 2 ? testing::gaussian_matrix(n, 1 + rng() % 10, rng())
                                 : testing::grid_matrix(n, 1 + rng() % 5, 3, rng());
        std::vector<std::string> ids;
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < n; ++i) {
            ids.push_back(std::to_string(i));
            rows.push_back({"s" + std::to_string(i % 3), "f" + std::to_string(i % 6)});
        }
        const LabelTable labels(ids, {"superfamily", "family"}, rows);
        CHECK(nn_classification_accuracy(m, labels, "superfamily") ==
              brute_nn_accuracy(m, labels.codes(0), nullptr));
        CHECK(nn_classification_accuracy(m, labels, "superfamily", ExclusionRule::same_label("family")) ==
              brute_nn_accuracy(m, labels.codes(0), &labels.codes(1)));
    }
}

TEST_CASE("report: planted stack end to end") {
    const auto planted = planted_stack(8, 3, 10, 100, 0);
    for (const std::size_t k : {5u, 10u, 30u}) {
        ReportConfig cfg;
        cfg.gt_k = k;
        cfg.consecutive_k = k;
        const auto r = build_report(planted.stack, &planted.labels, cfg);
        CAPTURE(k);
        CHECK(r.selection.index == 3);
        CHECK_FALSE(r.selection.fallback);
        CHECK(r.gt_argmax == 3u);
        CHECK(r.chi_gt->at(3).value == 1.0);
        CHECK(r.chi_consecutive.size() == 7);
        REQUIRE(r.nn_comparison.has_value());
        CHECK(r.nn_comparison->selected_accuracy == 1.0);
    }

    ReportConfig cfg;
    const auto a = build_report(planted.stack, &planted.labels, cfg);
    const auto b = build_report(planted.stack, &planted.labels, cfg);
    CHECK(report_json(a, "m", "l") == report_json(b, "m", "l"));
    CHECK(a.config.gt_k == 30);
    CHECK(a.consecutive_k == 30);
    CHECK(a.gt_level == "class");
    CHECK(a.gt_exclude_level.empty());
}

TEST_CASE("report: defaults without labels and for hierarchical labels") {
    const auto planted = planted_stack(5, 2, 4, 40, 3);
    const auto plain = build_report(planted.stack, nullptr, {});
    CHECK(plain.consecutive_k == 30);
    CHECK_FALSE(plain.chi_gt.has_value());
    CHECK_FALSE(plain.nn_accuracy.has_value());

    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < planted.labels.size(); ++i) {
        rows.push_back({planted.labels.label(i, 0), planted.labels.label(i, 0) + "_" + std::to_string(i % 2)});
    }
    const LabelTable hier(planted.labels.point_ids(), {"superfamily", "family"}, rows);
    const auto r = build_report(planted.stack, &hier, {});
    CHECK(r.config.gt_k == 10);
    CHECK(r.consecutive_k == 10);
    CHECK(r.gt_level == "superfamily");
    CHECK(r.gt_exclude_level == "family");
    CHECK(r.chi_gt->front().kind == OverlapKind::remote_homology);
}

TEST_CASE("report: single layer stack falls back") {
    LayerStack stack;
    stack.total_blocks = 1;
    auto m = testing::gaussian_matrix(200, 4, 1);
    m.set_layer(1, 1.0);
    stack.layers.push_back(m);
    for (int i = 0; i < 200; ++i) {
        stack.point_ids.push_back(std::to_string(i));
    }
    const auto r = build_report(stack, nullptr, {});
    CHECK(r.id_curve.size() == 1);
    CHECK(r.chi_consecutive.empty());
    CHECK(r.selection.fallback);
    CHECK(r.selection.index == 0);
}

TEST_CASE("report: errors carry the stage") {
    const auto planted = planted_stack(4, 1, 3, 20, 1);
    std::vector<std::string> ids(planted.labels.point_ids());
    ids.back() = "stranger";
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        rows.push_back({planted.labels.label(i, 0)});
    }
    const LabelTable wrong(ids, {"class"}, rows);
    try {
        build_report(planted.stack, &wrong, {});
        FAIL("expected an error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "labels");
        CHECK(std::string(e.what()).find("labels: ") == 0);
    }

    ReportConfig cfg;
    cfg.id.decimation_factor = 50;
    try {
        build_report(planted.stack, nullptr, cfg);
        FAIL("expected an error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "id-profile");
    }

    cfg = {};
    cfg.consecutive_k = 100;
    try {
        build_report(planted.stack, nullptr, cfg);
        FAIL("expected an error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "overlap-consecutive");
    }
}

TEST_CASE("argmax ties go to the smallest index") {
    const std::vector<double> v{1, 3, 2, 3};
    CHECK(argmax_index(v) == 1);
}
