// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "efvi/backbone.hpp"

namespace efvi {

// End-frame tokens: encode c_e as a single-frame causal latent, patchify,
// project with the EF-Net's own embedding. Returns F_0, shape L x D.
Mat embed_end_frame(const DenoiserModel& model, const Tensor4& c_e);

// Token-wise temporal coefficients followed by the outer-product expansion:
// coeffs = proj(tokens) is L x f; expanded token (frame k, token l) is
// coeffs(l, k) * tokens(l, :), reordered frame-major so row k*L + l aligns
// with the backbone token order. temporal_emb (f x D), when non-null, is
// added to every token of its frame after the expansion.
void temporal_expand(const Mat& tokens, const nn::Linear& proj, const Mat* temporal_emb,
                     Mat& coeffs, Mat& expanded);

// Adjoint of temporal_expand. Accumulates into d_tokens and d_temporal_emb
// (when present); proj gradients accumulate inside proj.
void temporal_expand_backward(const Mat& tokens, nn::Linear& proj, const Mat& coeffs,
                              const Mat& d_expanded, Mat& d_tokens, Mat* d_temporal_emb);

struct EFNetCache {
    Mat f0_raw;                  // L x c'p^2
    std::vector<Mat> f;          // f[0] = F_0 .. f[M]
    std::vector<nn::DiTBlock::Cache> bc;
    Mat zt_raw, zt_tokens;       // z_t tokens through the tied backbone embedding
    std::vector<Mat> coeffs;     // L x f per stage
    std::vector<Mat> expanded;   // (L*f) x D per stage
    std::vector<Mat> fuse_in;    // (L*f) x (2D | D)
    std::vector<Mat> h_pre, h_act;
    Mat d_feat, d_act, d_pre, d_fuse_in, d_expanded, d_chain, d_total, d_prev, d_zt, d_coeffs;
};

// Runs the M-stage pipeline: blocks, coefficient expansion, noised-latent
// fusion. Every returned sequence is scaled by scale_w. List order matches
// backbone blocks 1..M.
std::vector<Mat> efnet_forward(const DenoiserModel& model, const Tensor4& c_e, const Latent& z_t,
                               double scale_w, EFNetCache& cache);

void efnet_backward(DenoiserModel& model, const std::vector<Mat>& d_features, double scale_w,
                    EFNetCache& cache);

}  // namespace efvi
