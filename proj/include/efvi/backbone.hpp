// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "efvi/codec.hpp"
#include "efvi/nn.hpp"
#include "efvi/rng.hpp"

namespace efvi {

struct BackboneConfig {
    int blocks = 8;       // N
    int dim = 128;        // token dimension D
    int heads = 4;
    int patch = 4;        // spatial pixels per token side
    int latent_frames = 5;    // f
    int latent_channels = 6;  // c'
    int height = 32, width = 32;
    std::string prediction_target = "epsilon";

    int spatial_tokens() const { return (height / patch) * (width / patch); }  // L_s
    int seq_len() const { return latent_frames * spatial_tokens(); }
    int inject_channels() const { return 3 * latent_channels; }  // [z_t | start | end]
    int token_in() const { return inject_channels() * patch * patch; }
    int token_out() const { return latent_channels * patch * patch; }
    void validate() const;
};

struct EFNetConfig {
    int blocks = 4;  // M
    bool ablate_zt = false;
    bool use_temporal_embedding = false;
    double scale_w = 1.0;  // inference-time feature multiplier
};

struct EFNet {
    EFNetConfig cfg;
    nn::Linear embed;  // c'p^2 -> D end-frame patch embedding
    // Learned conditioning vector driving the blocks' modulation; the blocks
    // reuse the backbone architecture but see no timestep.
    Mat cond, gcond;
    std::vector<nn::DiTBlock> blocks;
    std::vector<nn::Linear> coeff;  // P_j: D -> f token-wise temporal coefficients
    std::vector<nn::Linear> fuse1;  // (2D, or D when ablate_zt) -> 2D
    std::vector<nn::Linear> fuse2;  // 2D -> D, final layer zero-initialized
    std::vector<Mat> temporal;      // E_j, f x D, present when use_temporal_embedding
    std::vector<Mat> gtemporal;
};

struct DenoiserModel {
    BackboneConfig cfg;
    nn::Linear patch_embed;  // 3c'p^2 -> D
    nn::PosEmbed pos;
    nn::TimestepEmbed temb;
    std::vector<nn::DiTBlock> blocks;
    nn::Linear head;  // D -> c'p^2, zero-initialized
    std::optional<EFNet> efnet;

    bool has_efnet() const { return efnet.has_value(); }
    nn::ParamRegistry params();
};

// Deterministic given seed. Backbone and EF-Net weights come from separate
// substreams, so an FT model and an EF-VI model with the same seed share
// backbone weights bit-exactly.
DenoiserModel init_model(const BackboneConfig& cfg, const std::optional<EFNetConfig>& efnet_cfg,
                         std::uint64_t seed);

// J(.): channel-concatenates the noised latent with temporally zero-padded
// encoded boundary frames. Slot layout [z_t | start | end]; absent conditions
// leave their slot zero so one backbone serves I2V, FT and EF-VI.
Latent inject_boundary(const Latent& z_t, const Tensor4* c_s, const Tensor4* c_e);

struct DenoiseCache {
    Mat tokens_raw, tokens, cond;
    nn::TimestepEmbed::Cache temb;
    std::vector<Mat> acts;  // acts[j]: input of block j; acts[N]: final sequence
    std::vector<nn::DiTBlock::Cache> bc;
    Mat out_tokens;
    Mat d_seq, d_prev, d_cond;
};

// Forward pass of the denoiser on an inject_boundary output. efnet_features,
// when present, holds exactly M sequences added to the outputs of the first
// M blocks. Returns the epsilon prediction with c' channels.
Latent denoise_predict(const DenoiserModel& model, const Latent& z_in, int t,
                       const std::vector<Mat>* efnet_features, DenoiseCache& cache);

// Accumulates parameter gradients for the preceding denoise_predict call.
// d_features, when non-null, receives the gradients flowing into the M
// injected feature sequences.
void denoise_backward(DenoiserModel& model, const Tensor4& d_eps, DenoiseCache& cache,
                      std::vector<Mat>* d_features);

}  // namespace efvi
