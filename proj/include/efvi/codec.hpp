// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "efvi/tensor.hpp"
#include "efvi/video.hpp"

namespace efvi {

enum class LatentMode { causal, spatial_only };

const char* to_string(LatentMode m);
LatentMode latent_mode_from_string(const std::string& s);

// Latent clip. Causal mode: f = 1 + (F-1)/2 latent frames, c' = 2C channels
// laid out [avg C | diff C]; the diff block of latent frame 1 is zero on any
// encoder output. Spatial-only mode is the per-frame identity (f = F,
// c' = C).
struct Latent {
    Tensor4 data;  // (f, c', H, W)
    LatentMode mode = LatentMode::causal;

    int frames() const { return data.n; }
    int channels() const { return data.c; }
};

// Causal pairwise Haar transform: z_1 = (x_1, 0) and, for k >= 2,
// z_k = ((x_{2k-2} + x_{2k-1})/2, (x_{2k-1} - x_{2k-2})/2). Each latent frame
// depends only on current-or-earlier pixels. Requires odd F in causal mode.
Latent encode(const Video& video, LatentMode mode);

// Single pixel frame (1, C, H, W) to a single-frame causal latent
// (1, 2C, H, W): avg = frame, diff = 0. Used for boundary injection.
Latent encode_frame(const Tensor4& frame);

// Exact inverse of encode on encoder outputs. Accepts out-of-space latents
// (nonzero first-frame diff is ignored): flipped latents are the object
// under study.
Video decode(const Latent& latent);

// Reverses the frame axis only; an involution.
Tensor4 flip(const Tensor4& t);
Video flip(const Video& v);
Latent flip(const Latent& z);

struct ProbeReport {
    double commutator_norm = 0.0;  // mean squared |Flip(E(x)) - E(Flip(x))|
    double roundtrip_mse = 0.0;    // mean squared |x - D(E(x))|
    double flipdecode_mse = 0.0;   // mean squared |Flip(x) - D(Flip(E(x)))|
    LatentMode mode = LatentMode::causal;
};

ProbeReport flip_probe(const Video& video, LatentMode mode);

}  // namespace efvi
