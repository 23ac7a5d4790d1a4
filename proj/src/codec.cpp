// SPDX-License-Identifier: Apache-2.0
#include "efvi/codec.hpp"

#include <algorithm>

#include "efvi/common.hpp"

namespace efvi {

const char* to_string(LatentMode m) {
    return m == LatentMode::causal ? "causal" : "spatial_only";
}

LatentMode latent_mode_from_string(const std::string& s) {
    if (s == "causal") return LatentMode::causal;
    if (s == "spatial_only") return LatentMode::spatial_only;
    throw ValidationError("unknown latent mode: " + s);
}

Latent encode(const Video& video, LatentMode mode) {
    const Tensor4& x = video.data;
    Latent z;
    z.mode = mode;
    if (mode == LatentMode::spatial_only) {
        z.data = x;
        return z;
    }
    if (x.n % 2 == 0)
        throw ValidationError("causal encode: frame count must be odd, got " + std::to_string(x.n));
    const int f = 1 + (x.n - 1) / 2;
    z.data = Tensor4(f, 2 * x.c, x.h, x.w);
    const std::size_t plane = static_cast<std::size_t>(x.c) * x.h * x.w;
    // Latent frame layout: [avg channels | diff channels].
    for (int k = 0; k < f; ++k) {
        double* avg = z.data.frame(k);
        double* diff = avg + plane;
        if (k == 0) {
            const double* x1 = x.frame(0);
            std::copy(x1, x1 + plane, avg);
            // diff already zero
        } else {
            const double* a = x.frame(2 * k - 1);  // x_{2k-2} in 1-based indexing
            const double* b = x.frame(2 * k);      // x_{2k-1}
            for (std::size_t i = 0; i < plane; ++i) {
                avg[i] = (a[i] + b[i]) / 2.0;
                diff[i] = (b[i] - a[i]) / 2.0;
            }
        }
    }
    return z;
}

Latent encode_frame(const Tensor4& frame) {
    Latent z;
    z.mode = LatentMode::causal;
    z.data = Tensor4(1, 2 * frame.c, frame.h, frame.w);
    std::copy(frame.v.begin(), frame.v.end(), z.data.v.begin());  // avg = frame, diff stays zero
    return z;
}

Video decode(const Latent& latent) {
    Video video;
    if (latent.mode == LatentMode::spatial_only) {
        video.data = latent.data;
        return video;
    }
    if (latent.data.c % 2 != 0)
        throw ValidationError("causal decode: channel count must be even, got " +
                              std::to_string(latent.data.c));
    const int f = latent.data.n;
    const int C = latent.data.c / 2;
    const int F = 2 * f - 1;
    video.data = Tensor4(F, C, latent.data.h, latent.data.w);
    const std::size_t plane = static_cast<std::size_t>(C) * latent.data.h * latent.data.w;
    for (int k = 0; k < f; ++k) {
        const double* avg = latent.data.frame(k);
        const double* diff = avg + plane;
        if (k == 0) {
            // First-frame diff block intentionally ignored.
            std::copy(avg, avg + plane, video.data.frame(0));
        } else {
            double* a = video.data.frame(2 * k - 1);
            double* b = video.data.frame(2 * k);
            for (std::size_t i = 0; i < plane; ++i) {
                a[i] = avg[i] - diff[i];
                b[i] = avg[i] + diff[i];
            }
        }
    }
    return video;
}

Tensor4 flip(const Tensor4& t) {
    Tensor4 out(t.n, t.c, t.h, t.w);
    const std::size_t plane = t.frame_size();
    for (int i = 0; i < t.n; ++i) {
        const double* src = t.frame(i);
        std::copy(src, src + plane, out.frame(t.n - 1 - i));
    }
    return out;
}

Video flip(const Video& v) {
    Video out;
    out.fps = v.fps;
    out.data = flip(v.data);
    return out;
}

Latent flip(const Latent& z) {
    Latent out;
    out.mode = z.mode;
    out.data = flip(z.data);
    return out;
}

ProbeReport flip_probe(const Video& video, LatentMode mode) {
    ProbeReport report;
    report.mode = mode;
    const Latent z = encode(video, mode);
    const Video xf = flip(video);
    report.roundtrip_mse = mse(video.data.v, decode(z).data.v);
    report.commutator_norm = mse(flip(z).data.v, encode(xf, mode).data.v);
    report.flipdecode_mse = mse(xf.data.v, decode(flip(z)).data.v);
    return report;
}

}  // namespace efvi
