// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "efvi/video.hpp"

namespace efvi {

enum class DistanceKind { mse, mae };

const char* to_string(DistanceKind k);
DistanceKind distance_kind_from_string(const std::string& s);

// Mean squared or mean absolute pixel difference between two equally shaped
// frames. Symmetric, non-negative, zero iff equal.
double frame_distance(const Tensor4& a, const Tensor4& b, DistanceKind kind);

// Per-intermediate-frame distances to the boundary frames:
// d_start[i] = distance(x_{i+1}, x_1), d_end[i] = distance(x_{i+1}, x_F),
// for i = 1..F-2 (1-based frames).
struct BoundaryCurves {
    std::vector<double> d_start, d_end;
    DistanceKind kind = DistanceKind::mse;
};

BoundaryCurves boundary_curves(const Video& video, DistanceKind kind);

struct CurveSummary {
    double deviation_start = 0.0;  // mean |gen.d_start - gt.d_start|
    double deviation_end = 0.0;
    double asymmetry = 0.0;        // sum(gen.d_end) - sum(gen.d_start)
    double total_deviation = 0.0;  // deviation_start + deviation_end
};

CurveSummary curve_summary(const BoundaryCurves& gen, const BoundaryCurves& gt);

// Weighted-average score over normalized dimensions:
// s_f = sum_j w_j * (s_j - s_j^max) / (s_j^min - s_j^max).
struct ScoreAggregation {
    std::vector<double> scores, weights, s_min, s_max;
};

double aggregate_score(const ScoreAggregation& agg);

}  // namespace efvi
