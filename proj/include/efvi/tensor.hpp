// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace efvi {

// Dense rank-4 tensor, (n, c, h, w) with w fastest. Videos are (F, C, H, W),
// latents (f, c', H, W).
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}

    std::size_t size() const { return v.size(); }
    std::size_t frame_size() const { return static_cast<std::size_t>(c) * h * w; }

    double& at(int i, int j, int y, int x) {
        return v[((static_cast<std::size_t>(i) * c + j) * h + y) * w + x];
    }
    double at(int i, int j, int y, int x) const {
        return v[((static_cast<std::size_t>(i) * c + j) * h + y) * w + x];
    }

    double* frame(int i) { return v.data() + static_cast<std::size_t>(i) * frame_size(); }
    const double* frame(int i) const { return v.data() + static_cast<std::size_t>(i) * frame_size(); }

    // Single-frame copy, shape (1, c, h, w).
    Tensor4 slice_frame(int i) const {
        Tensor4 out(1, c, h, w);
        const double* src = frame(i);
        std::copy(src, src + frame_size(), out.v.begin());
        return out;
    }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

// Row-major matrix used for token sequences and parameters.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    void resize(int r, int c) {
        rows = r;
        cols = c;
        v.assign(static_cast<std::size_t>(r) * c, 0.0);
    }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }

    std::size_t size() const { return v.size(); }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }
    double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }

    double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

inline void add_inplace(Mat& a, const Mat& b) {
    assert(a.size() == b.size());
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

inline double mse(const std::vector<double>& a, const std::vector<double>& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

}  // namespace efvi
