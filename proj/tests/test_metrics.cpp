// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "efvi/metrics.hpp"
#include "efvi/rng.hpp"

using namespace efvi;

TEST_CASE("frame_distance semimetric properties and hand values") {
    Tensor4 a(1, 3, 4, 4), b(1, 3, 4, 4);
    Rng rng(1);
    for (auto& x : a.v) x = rng.uniform();
    for (auto& x : b.v) x = rng.uniform();

    CHECK(frame_distance(a, a, DistanceKind::mse) == 0.0);
    CHECK(frame_distance(a, a, DistanceKind::mae) == 0.0);
    CHECK(frame_distance(a, b, DistanceKind::mse) == frame_distance(b, a, DistanceKind::mse));
    CHECK(frame_distance(a, b, DistanceKind::mse) > 0.0);

    Tensor4 zeros(1, 3, 2, 2), ones(1, 3, 2, 2);
    std::fill(ones.v.begin(), ones.v.end(), 1.0);
    CHECK(frame_distance(zeros, ones, DistanceKind::mse) == 1.0);
    CHECK(frame_distance(zeros, ones, DistanceKind::mae) == 1.0);

    // Brute-force scalar loop oracle.
    double se = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        se += (a.v[i] - b.v[i]) * (a.v[i] - b.v[i]);
        ae += std::abs(a.v[i] - b.v[i]);
    }
    CHECK(frame_distance(a, b, DistanceKind::mse) ==
          doctest::Approx(se / a.v.size()).epsilon(1e-15));
    CHECK(frame_distance(a, b, DistanceKind::mae) ==
          doctest::Approx(ae / a.v.size()).epsilon(1e-15));

    Tensor4 other(1, 3, 2, 4);
    CHECK_THROWS_AS(frame_distance(a, other, DistanceKind::mse), ValidationError);
}

TEST_CASE("boundary curves of a static video are zero") {
    Video v;
    v.data = Tensor4(7, 3, 4, 4);
    std::fill(v.data.v.begin(), v.data.v.end(), 0.3);
    const BoundaryCurves c = boundary_curves(v, DistanceKind::mse);
    REQUIRE(c.d_start.size() == 5);
    for (double x : c.d_start) CHECK(x == 0.0);
    for (double x : c.d_end) CHECK(x == 0.0);
}

TEST_CASE("boundary curves of a linear crossfade are monotone") {
    Rng rng(5);
    Tensor4 first(1, 3, 4, 4), last(1, 3, 4, 4);
    for (auto& x : first.v) x = rng.uniform();
    for (auto& x : last.v) x = rng.uniform();
    const int F = 9;
    Video v;
    v.data = Tensor4(F, 3, 4, 4);
    for (int i = 0; i < F; ++i) {
        const double u = static_cast<double>(i) / (F - 1);
        for (std::size_t q = 0; q < first.v.size(); ++q)
            v.data.frame(i)[q] = (1.0 - u) * first.v[q] + u * last.v[q];
    }
    const BoundaryCurves c = boundary_curves(v, DistanceKind::mse);
    for (std::size_t i = 1; i < c.d_start.size(); ++i) {
        CHECK(c.d_start[i] >= c.d_start[i - 1]);
        CHECK(c.d_end[i] <= c.d_end[i - 1]);
    }
    // Closed form of the blend: d_start(u) = u^2 * mse(first, last).
    const double base = frame_distance(first, last, DistanceKind::mse);
    for (std::size_t i = 0; i < c.d_start.size(); ++i) {
        const double u = static_cast<double>(i + 1) / (F - 1);
        CHECK(c.d_start[i] == doctest::Approx(u * u * base).epsilon(1e-12));
        CHECK(c.d_end[i] == doctest::Approx((1 - u) * (1 - u) * base).epsilon(1e-12));
    }

    // Palindromic content has zero curve asymmetry.
    Video pal;
    pal.data = Tensor4(5, 3, 4, 4);
    for (int i = 0; i < 5; ++i) {
        const double w = i == 2 ? 1.0 : (i == 1 || i == 3 ? 0.5 : 0.0);
        for (std::size_t q = 0; q < first.v.size(); ++q)
            pal.data.frame(i)[q] = (1.0 - w) * first.v[q] + w * last.v[q];
    }
    // Make it truly palindromic: frame F = frame 1.
    std::copy(pal.data.frame(0), pal.data.frame(0) + pal.data.frame_size(), pal.data.frame(4));
    const BoundaryCurves pc = boundary_curves(pal, DistanceKind::mse);
    const CurveSummary ps = curve_summary(pc, pc);
    CHECK(ps.asymmetry == doctest::Approx(0.0).epsilon(1e-15));

    Video tiny;
    tiny.data = Tensor4(1, 3, 2, 2);
    CHECK_THROWS_AS(boundary_curves(tiny, DistanceKind::mse), ValidationError);
}

TEST_CASE("mse curves on unit-range pixels stay within [0, 1]") {
    Rng rng(6);
    Video v;
    v.data = Tensor4(9, 3, 4, 4);
    for (auto& x : v.data.v) x = rng.uniform();
    const BoundaryCurves c = boundary_curves(v, DistanceKind::mse);
    for (double x : c.d_start) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }
}

TEST_CASE("curve_summary fields") {
    BoundaryCurves gt;
    gt.kind = DistanceKind::mse;
    gt.d_start = {0.1, 0.2, 0.3};
    gt.d_end = {0.3, 0.2, 0.1};

    SUBCASE("identical curves give zero deviation") {
        const CurveSummary s = curve_summary(gt, gt);
        CHECK(s.total_deviation == 0.0);
        CHECK(s.deviation_start == 0.0);
        CHECK(s.deviation_end == 0.0);
    }

    SUBCASE("constant shift on d_end only") {
        BoundaryCurves gen = gt;
        for (auto& x : gen.d_end) x += 0.05;
        const CurveSummary s = curve_summary(gen, gt);
        CHECK(s.deviation_start == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(s.deviation_end == doctest::Approx(0.05).epsilon(1e-12));
        CHECK(s.total_deviation == doctest::Approx(0.05).epsilon(1e-12));
    }

    SUBCASE("random curves match a scalar loop oracle") {
        Rng rng(9);
        BoundaryCurves gen = gt;
        for (auto& x : gen.d_start) x = rng.uniform();
        for (auto& x : gen.d_end) x = rng.uniform();
        const CurveSummary s = curve_summary(gen, gt);
        double ds = 0.0, de = 0.0, asym = 0.0;
        for (int i = 0; i < 3; ++i) {
            ds += std::abs(gen.d_start[i] - gt.d_start[i]);
            de += std::abs(gen.d_end[i] - gt.d_end[i]);
            asym += gen.d_end[i] - gen.d_start[i];
        }
        CHECK(s.deviation_start == doctest::Approx(ds / 3).epsilon(1e-15));
        CHECK(s.deviation_end == doctest::Approx(de / 3).epsilon(1e-15));
        CHECK(s.asymmetry == doctest::Approx(asym).epsilon(1e-15));
        CHECK(s.total_deviation == doctest::Approx(s.deviation_start + s.deviation_end));
    }

    SUBCASE("length mismatch is rejected") {
        BoundaryCurves bad = gt;
        bad.d_start.push_back(0.0);
        bad.d_end.push_back(0.0);
        CHECK_THROWS_AS(curve_summary(bad, gt), ValidationError);
    }
}

TEST_CASE("aggregate_score implements the weighted normalization") {
    ScoreAggregation agg;
    agg.weights = {1.0, 2.0, 0.5};
    agg.s_min = {0.0, 1.0, -1.0};
    agg.s_max = {1.0, 3.0, 1.0};

    SUBCASE("all scores at max give zero") {
        agg.scores = agg.s_max;
        CHECK(aggregate_score(agg) == 0.0);
    }

    SUBCASE("all scores at min give the weight sum") {
        agg.scores = agg.s_min;
        CHECK(aggregate_score(agg) == doctest::Approx(3.5).epsilon(1e-15));
    }

    SUBCASE("random instance matches hand evaluation") {
        agg.scores = {0.25, 2.5, 0.0};
        const double expected = 1.0 * (0.25 - 1.0) / (0.0 - 1.0) + 2.0 * (2.5 - 3.0) / (1.0 - 3.0) +
                                0.5 * (0.0 - 1.0) / (-1.0 - 1.0);
        CHECK(aggregate_score(agg) == doctest::Approx(expected).epsilon(1e-15));
    }

    SUBCASE("affine in each score with slope w/(min-max)") {
        agg.scores = {0.25, 2.5, 0.0};
        const double f0 = aggregate_score(agg);
        ScoreAggregation agg2 = agg;
        agg2.scores[1] += 0.125;
        const double f1 = aggregate_score(agg2);
        CHECK((f1 - f0) / 0.125 == doctest::Approx(2.0 / (1.0 - 3.0)).epsilon(1e-12));
    }

    SUBCASE("degenerate normalization is rejected") {
        agg.scores = {0.0, 0.0, 0.0};
        agg.s_min[2] = agg.s_max[2];
        CHECK_THROWS_AS(aggregate_score(agg), ValidationError);
    }
}
