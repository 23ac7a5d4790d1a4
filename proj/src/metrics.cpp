// SPDX-License-Identifier: Apache-2.0
#include "efvi/metrics.hpp"

#include <cmath>

#include "efvi/common.hpp"

namespace efvi {

const char* to_string(DistanceKind k) {
    return k == DistanceKind::mse ? "mse" : "mae";
}

DistanceKind distance_kind_from_string(const std::string& s) {
    if (s == "mse") return DistanceKind::mse;
    if (s == "mae") return DistanceKind::mae;
    throw ValidationError("unknown distance kind: " + s);
}

double frame_distance(const Tensor4& a, const Tensor4& b, DistanceKind kind) {
    if (!a.same_shape(b)) throw ValidationError("frame_distance: shape mismatch");
    double s = 0.0;
    if (kind == DistanceKind::mse) {
        for (std::size_t i = 0; i < a.v.size(); ++i) {
            const double d = a.v[i] - b.v[i];
            s += d * d;
        }
    } else {
        for (std::size_t i = 0; i < a.v.size(); ++i) s += std::abs(a.v[i] - b.v[i]);
    }
    return s / static_cast<double>(a.v.size());
}

BoundaryCurves boundary_curves(const Video& video, DistanceKind kind) {
    const int F = video.frames();
    if (F < 3) throw ValidationError("boundary_curves: need at least 3 frames");
    BoundaryCurves curves;
    curves.kind = kind;
    const Tensor4 first = video.data.slice_frame(0);
    const Tensor4 last = video.data.slice_frame(F - 1);
    curves.d_start.reserve(F - 2);
    curves.d_end.reserve(F - 2);
    for (int i = 1; i < F - 1; ++i) {
        const Tensor4 frame = video.data.slice_frame(i);
        curves.d_start.push_back(frame_distance(frame, first, kind));
        curves.d_end.push_back(frame_distance(frame, last, kind));
    }
    return curves;
}

CurveSummary curve_summary(const BoundaryCurves& gen, const BoundaryCurves& gt) {
    if (gen.d_start.size() != gt.d_start.size() || gen.kind != gt.kind)
        throw ValidationError("curve_summary: curve length or kind mismatch");
    CurveSummary s;
    const std::size_t n = gen.d_start.size();
    for (std::size_t i = 0; i < n; ++i) {
        s.deviation_start += std::abs(gen.d_start[i] - gt.d_start[i]);
        s.deviation_end += std::abs(gen.d_end[i] - gt.d_end[i]);
        s.asymmetry += gen.d_end[i] - gen.d_start[i];
    }
    if (n > 0) {
        s.deviation_start /= static_cast<double>(n);
        s.deviation_end /= static_cast<double>(n);
    }
    s.total_deviation = s.deviation_start + s.deviation_end;
    return s;
}

double aggregate_score(const ScoreAggregation& agg) {
    const std::size_t n = agg.scores.size();
    if (agg.weights.size() != n || agg.s_min.size() != n || agg.s_max.size() != n)
        throw ValidationError("aggregate_score: dimension mismatch");
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (!(std::isfinite(agg.scores[j]) && std::isfinite(agg.weights[j]) &&
              std::isfinite(agg.s_min[j]) && std::isfinite(agg.s_max[j])))
            throw ValidationError("aggregate_score: non-finite input");
        if (agg.s_min[j] == agg.s_max[j])
            throw ValidationError("aggregate_score: s_min equals s_max for dimension " +
                                  std::to_string(j));
        total += agg.weights[j] * (agg.scores[j] - agg.s_max[j]) / (agg.s_min[j] - agg.s_max[j]);
    }
    return total;
}

}  // namespace efvi
