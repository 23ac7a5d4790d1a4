// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "efvi/backbone.hpp"
#include "efvi/efnet.hpp"

namespace efvi {

struct NoiseSchedule {
    int timesteps = 0;  // T
    std::string kind = "cosine";
    // Indexed 0..T; alpha[0] = 1, sigma[0] = 0, alpha strictly decreasing and
    // clamped away from zero so the sampling update never divides by zero.
    std::vector<double> alpha, sigma;
};

NoiseSchedule make_schedule(int timesteps, const std::string& kind = "cosine");

// z_t = alpha_t z + sigma_t eps.
Latent add_noise(const Latent& z, int t, const Latent& eps, const NoiseSchedule& schedule);

Latent gaussian_latent(int frames, int channels, int height, int width, Rng& rng);

// Uniform stride over [T, 1] with `steps` points, then a final step to 0.
std::vector<int> sample_timesteps(int timesteps, int steps);

enum class TrainRegime { FT, EFVI };
enum class SampleRegime { I2V, FT, EFVI, BD };
enum class FuseKind { uniform, linear_ramp };

const char* to_string(SampleRegime r);
SampleRegime sample_regime_from_string(const std::string& s);
FuseKind fuse_kind_from_string(const std::string& s);

struct LossWorkspace {
    DenoiseCache dc;
    EFNetCache ec;
    std::vector<Mat> feats;
    std::vector<Mat> d_feats;
};

// Epsilon-prediction squared-error loss for one training example. With
// with_grad, parameter gradients accumulate into the model. rng drives the
// per-slot condition dropout; dropping the end condition also drops the
// EF-Net features so "end frame absent" is a coherent mode.
double training_loss(DenoiserModel& model, const Video& clip, int t, const Latent& eps,
                     TrainRegime regime, const NoiseSchedule& schedule, double cond_dropout,
                     Rng& rng, LossWorkspace& ws, bool with_grad = true);

// Same loss on a pre-encoded example with explicit dropout decisions.
double training_loss_encoded(DenoiserModel& model, const Latent& z, const Tensor4& c_s,
                             const Tensor4& c_e, int t, const Latent& eps, TrainRegime regime,
                             const NoiseSchedule& schedule, bool drop_start, bool drop_end,
                             LossWorkspace& ws, bool with_grad = true);

struct TrainConfig {
    TrainRegime regime = TrainRegime::FT;
    int batch_size = 8;
    int iterations = 2000;
    double lr = 2e-4;
    double lr_min = 2e-5;  // cosine annealing floor
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double weight_decay = 0.01;
    double cond_dropout = 0.1;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // 0: no intermediate checkpoints
    int threads = 0;           // 0: hardware concurrency (capped by batch size)
};

struct TrainResult {
    std::vector<double> loss_trace;  // per-iteration batch mean
};

using CheckpointHook = std::function<void(int iteration, DenoiserModel& model)>;

// Trains all parameters jointly (backbone and EF-Net) with AdamW and a
// cosine-annealed learning rate. Deterministic given (config, thread count).
// Aborts with the iteration index if the loss turns non-finite.
TrainResult train(DenoiserModel& model, const std::vector<Video>& clips, const TrainConfig& cfg,
                  const NoiseSchedule& schedule, const CheckpointHook& hook = nullptr);

struct SamplerConfig {
    int steps = 30;
    SampleRegime regime = SampleRegime::FT;
    double eta = 0.0;  // 0 = deterministic
    FuseKind fuse_kind = FuseKind::linear_ramp;
    double fuse_lambda = 0.5;  // uniform fusion weight
    std::uint64_t seed = 0;
    std::optional<double> scale_w;  // overrides the model's EF-Net scale
};

// One denoising update from t to t_next: zhat_0 = (z_t - sigma_t e)/alpha_t,
// then z_next = alpha_next zhat_0 + sqrt(sigma_next^2 - tau^2) e + tau xi
// with tau the eta-scaled per-step noise level.
Latent sample_step(const Latent& z_t, const Latent& eps_hat, int t, int t_next,
                   const NoiseSchedule& schedule, double eta, Rng& rng);

// Unidirectional sampling (I2V, FT, EFVI): seeded Gaussian start, decode with
// the causal codec, clamp to [0,1], overwrite frames 1 and F with the given
// boundary frames.
Video sample(const DenoiserModel& model, const Tensor4& c_s, const Tensor4& c_e,
             const SamplerConfig& cfg, const NoiseSchedule& schedule);

// Bidirectional sampling: per step, a start-conditioned branch plus an
// end-conditioned branch running on the temporally flipped latent (the end
// frame sits in the start slot of the reversed sequence), fused per
// fuse_kind.
Video sample_bidirectional(const DenoiserModel& model, const Tensor4& c_s, const Tensor4& c_e,
                           const SamplerConfig& cfg, const NoiseSchedule& schedule);

}  // namespace efvi
