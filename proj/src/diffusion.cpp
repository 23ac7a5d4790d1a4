// SPDX-License-Identifier: Apache-2.0
#include "efvi/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "efvi/common.hpp"

namespace efvi {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

NoiseSchedule make_schedule(int timesteps, const std::string& kind) {
    if (timesteps < 2) throw ValidationError("schedule: timesteps must be >= 2");
    if (kind != "cosine") throw ValidationError("schedule: unknown kind " + kind);
    NoiseSchedule s;
    s.timesteps = timesteps;
    s.kind = kind;
    s.alpha.resize(timesteps + 1);
    s.sigma.resize(timesteps + 1);
    const double offset = 0.008;
    const auto sq_cos = [&](double u) {
        const double c = std::cos((u + offset) / (1.0 + offset) * kPi / 2.0);
        return c * c;
    };
    const double norm = sq_cos(0.0);
    for (int t = 0; t <= timesteps; ++t) {
        double abar = sq_cos(static_cast<double>(t) / timesteps) / norm;
        abar = std::clamp(abar, 1e-8, 1.0);  // keeps alpha_T nonzero
        s.alpha[t] = std::sqrt(abar);
        s.sigma[t] = std::sqrt(1.0 - abar);
    }
    return s;
}

Latent add_noise(const Latent& z, int t, const Latent& eps, const NoiseSchedule& schedule) {
    if (!z.data.same_shape(eps.data)) throw ValidationError("add_noise: shape mismatch");
    if (t < 1 || t > schedule.timesteps)
        throw ValidationError("add_noise: t must be in [1, T], got " + std::to_string(t));
    Latent out;
    out.mode = z.mode;
    out.data = Tensor4(z.data.n, z.data.c, z.data.h, z.data.w);
    const double a = schedule.alpha[t], s = schedule.sigma[t];
    for (std::size_t i = 0; i < z.data.v.size(); ++i)
        out.data.v[i] = a * z.data.v[i] + s * eps.data.v[i];
    return out;
}

Latent gaussian_latent(int frames, int channels, int height, int width, Rng& rng) {
    Latent z;
    z.mode = LatentMode::causal;
    z.data = Tensor4(frames, channels, height, width);
    for (auto& x : z.data.v) x = rng.gaussian();
    return z;
}

std::vector<int> sample_timesteps(int timesteps, int steps) {
    if (steps < 1 || steps > timesteps)
        throw ValidationError("sampler: steps must be in [1, T]");
    std::vector<int> ts;
    ts.reserve(steps + 1);
    if (steps == 1) {
        ts.push_back(timesteps);
    } else {
        for (int i = 0; i < steps; ++i) {
            const double x = timesteps - static_cast<double>(i) * (timesteps - 1) / (steps - 1);
            ts.push_back(static_cast<int>(std::llround(x)));
        }
    }
    ts.push_back(0);
    return ts;
}

const char* to_string(SampleRegime r) {
    switch (r) {
        case SampleRegime::I2V: return "i2v";
        case SampleRegime::FT: return "ft";
        case SampleRegime::EFVI: return "efvi";
        case SampleRegime::BD: return "bd";
    }
    return "?";
}

SampleRegime sample_regime_from_string(const std::string& s) {
    if (s == "i2v") return SampleRegime::I2V;
    if (s == "ft") return SampleRegime::FT;
    if (s == "efvi") return SampleRegime::EFVI;
    if (s == "bd") return SampleRegime::BD;
    throw ValidationError("unknown sampling regime: " + s);
}

FuseKind fuse_kind_from_string(const std::string& s) {
    if (s == "uniform") return FuseKind::uniform;
    if (s == "linear_ramp") return FuseKind::linear_ramp;
    throw ValidationError("unknown fuse kind: " + s);
}

double training_loss(DenoiserModel& model, const Video& clip, int t, const Latent& eps,
                     TrainRegime regime, const NoiseSchedule& schedule, double cond_dropout,
                     Rng& rng, LossWorkspace& ws, bool with_grad) {
    const Latent z = encode(clip, LatentMode::causal);
    const Tensor4 c_s = clip.data.slice_frame(0);
    const Tensor4 c_e = clip.data.slice_frame(clip.frames() - 1);
    const bool drop_start = cond_dropout > 0.0 && rng.bernoulli(cond_dropout);
    const bool drop_end = cond_dropout > 0.0 && rng.bernoulli(cond_dropout);
    return training_loss_encoded(model, z, c_s, c_e, t, eps, regime, schedule, drop_start,
                                 drop_end, ws, with_grad);
}

double training_loss_encoded(DenoiserModel& model, const Latent& z, const Tensor4& c_s,
                             const Tensor4& c_e, int t, const Latent& eps, TrainRegime regime,
                             const NoiseSchedule& schedule, bool drop_start, bool drop_end,
                             LossWorkspace& ws, bool with_grad) {
    if (regime == TrainRegime::EFVI && !model.has_efnet())
        throw ValidationError("training_loss: EFVI regime requires an EF-Net-bearing model");

    const Latent z_t = add_noise(z, t, eps, schedule);
    const Latent z_in = inject_boundary(z_t, drop_start ? nullptr : &c_s, drop_end ? nullptr : &c_e);

    const bool use_efnet = regime == TrainRegime::EFVI && !drop_end;
    double scale_w = 1.0;
    if (use_efnet) {
        scale_w = model.efnet->cfg.scale_w;
        ws.feats = efnet_forward(model, c_e, z_t, scale_w, ws.ec);
    }
    const Latent eps_hat = denoise_predict(model, z_in, t, use_efnet ? &ws.feats : nullptr, ws.dc);
    const double loss = mse(eps_hat.data.v, eps.data.v);

    if (with_grad) {
        Tensor4 d_eps(eps_hat.data.n, eps_hat.data.c, eps_hat.data.h, eps_hat.data.w);
        const double inv_n = 1.0 / static_cast<double>(d_eps.size());
        for (std::size_t i = 0; i < d_eps.v.size(); ++i)
            d_eps.v[i] = 2.0 * (eps_hat.data.v[i] - eps.data.v[i]) * inv_n;
        denoise_backward(model, d_eps, ws.dc, use_efnet ? &ws.d_feats : nullptr);
        if (use_efnet) efnet_backward(model, ws.d_feats, scale_w, ws.ec);
    }
    return loss;
}

namespace {

struct BatchItem {
    int clip_index = 0;
    int t = 1;
    Latent eps;
    bool drop_start = false, drop_end = false;
};

struct EncodedExample {
    Latent z;
    Tensor4 c_s, c_e;
};

void copy_params(nn::ParamRegistry& src, nn::ParamRegistry& dst) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].value->v = src[i].value->v;
}

}  // namespace

TrainResult train(DenoiserModel& model, const std::vector<Video>& clips, const TrainConfig& cfg,
                  const NoiseSchedule& schedule, const CheckpointHook& hook) {
    if (clips.empty()) throw ValidationError("train: dataset is empty");
    if (cfg.batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (cfg.iterations < 0) throw ValidationError("train: iterations must be >= 0");
    if (cfg.lr < 0.0 || cfg.lr_min < 0.0) throw ValidationError("train: learning rates must be >= 0");
    if (cfg.cond_dropout < 0.0 || cfg.cond_dropout >= 1.0)
        throw ValidationError("train: cond_dropout must be in [0, 1)");
    if (cfg.regime == TrainRegime::EFVI && !model.has_efnet())
        throw ValidationError("train: EFVI regime requires an EF-Net-bearing model");

    std::vector<EncodedExample> examples(clips.size());
    for (std::size_t i = 0; i < clips.size(); ++i) {
        examples[i].z = encode(clips[i], LatentMode::causal);
        examples[i].c_s = clips[i].data.slice_frame(0);
        examples[i].c_e = clips[i].data.slice_frame(clips[i].frames() - 1);
    }
    const BackboneConfig& bc = model.cfg;
    if (examples[0].z.data.n != bc.latent_frames || examples[0].z.data.c != bc.latent_channels ||
        examples[0].z.data.h != bc.height || examples[0].z.data.w != bc.width)
        throw ValidationError("train: clip geometry does not match the model");

    int workers = cfg.threads > 0 ? cfg.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, cfg.batch_size);

    // Worker replicas carry their own gradient buffers; replica 0 is the
    // model itself. Per-replica sums are reduced in replica order, so runs
    // are bit-deterministic for a fixed worker count.
    std::vector<DenoiserModel> replicas(workers - 1, model);
    std::vector<nn::ParamRegistry> regs;
    regs.push_back(model.params());
    for (auto& r : replicas) regs.push_back(r.params());
    std::vector<LossWorkspace> workspaces(workers);

    nn::AdamW opt;
    opt.beta1 = cfg.beta1;
    opt.beta2 = cfg.beta2;
    opt.eps = cfg.adam_eps;
    opt.weight_decay = cfg.weight_decay;

    Rng rng = Rng(cfg.seed).stream("train");
    TrainResult result;
    result.loss_trace.reserve(cfg.iterations);

    std::vector<BatchItem> batch(cfg.batch_size);
    std::vector<double> sample_loss(cfg.batch_size);

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        for (int b = 0; b < cfg.batch_size; ++b) {
            BatchItem& item = batch[b];
            item.clip_index = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(examples.size()) - 1));
            item.t = static_cast<int>(rng.uniform_int(1, schedule.timesteps));
            item.eps = gaussian_latent(bc.latent_frames, bc.latent_channels, bc.height, bc.width, rng);
            item.drop_start = cfg.cond_dropout > 0.0 && rng.bernoulli(cfg.cond_dropout);
            item.drop_end = cfg.cond_dropout > 0.0 && rng.bernoulli(cfg.cond_dropout);
        }

        for (auto& reg : regs) nn::zero_grads(reg);

        std::exception_ptr worker_error;
        std::mutex error_mutex;
        auto run_worker = [&](int w) {
            try {
                DenoiserModel& m = w == 0 ? model : replicas[w - 1];
                // Contiguous shard; remainder spread over the leading workers.
                const int base = cfg.batch_size / workers, extra = cfg.batch_size % workers;
                const int begin = w * base + std::min(w, extra);
                const int end = begin + base + (w < extra ? 1 : 0);
                for (int b = begin; b < end; ++b) {
                    const BatchItem& item = batch[b];
                    const EncodedExample& ex = examples[item.clip_index];
                    sample_loss[b] = training_loss_encoded(m, ex.z, ex.c_s, ex.c_e, item.t,
                                                           item.eps, cfg.regime, schedule,
                                                           item.drop_start, item.drop_end,
                                                           workspaces[w]);
                }
            } catch (...) {
                const std::scoped_lock lock(error_mutex);
                if (!worker_error) worker_error = std::current_exception();
            }
        };
        if (workers == 1) {
            run_worker(0);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (int w = 0; w < workers; ++w) pool.emplace_back(run_worker, w);
            for (auto& th : pool) th.join();
        }
        if (worker_error) std::rethrow_exception(worker_error);

        for (int w = 1; w < workers; ++w)
            for (std::size_t i = 0; i < regs[0].size(); ++i)
                add_inplace(*regs[0][i].grad, *regs[w][i].grad);
        const double inv_b = 1.0 / cfg.batch_size;
        for (std::size_t i = 0; i < regs[0].size(); ++i)
            for (auto& g : regs[0][i].grad->v) g *= inv_b;

        double loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) loss += sample_loss[b];
        loss *= inv_b;
        if (!std::isfinite(loss))
            throw std::runtime_error("training diverged (non-finite loss) at iteration " +
                                     std::to_string(iter));
        result.loss_trace.push_back(loss);

        const double u = cfg.iterations > 1 ? static_cast<double>(iter) / (cfg.iterations - 1) : 0.0;
        const double lr = cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(kPi * u));
        opt.step(regs[0], lr);
        for (int w = 1; w < workers; ++w) copy_params(regs[0], regs[w]);

        if (hook && cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0)
            hook(iter + 1, model);
    }
    return result;
}

namespace {

Video finalize_sample(const Latent& z0, const Tensor4& c_s, const Tensor4& c_e) {
    Video video = decode(z0);
    for (auto& x : video.data.v) x = std::clamp(x, 0.0, 1.0);
    // The task supplies the boundary frames; evaluation measures only the
    // intermediate frames.
    std::copy(c_s.v.begin(), c_s.v.end(), video.data.frame(0));
    std::copy(c_e.v.begin(), c_e.v.end(), video.data.frame(video.frames() - 1));
    return video;
}

void validate_sampler(const DenoiserModel& model, const SamplerConfig& cfg,
                      const NoiseSchedule& schedule) {
    if (cfg.steps < 1 || cfg.steps > schedule.timesteps)
        throw ValidationError("sampler: steps must be in [1, T]");
    if (cfg.eta < 0.0 || cfg.eta > 1.0) throw ValidationError("sampler: eta must be in [0, 1]");
    if (cfg.fuse_lambda < 0.0 || cfg.fuse_lambda > 1.0)
        throw ValidationError("sampler: fuse_lambda must be in [0, 1]");
    if (cfg.regime == SampleRegime::EFVI && !model.has_efnet())
        throw ValidationError("sampler: EFVI regime requires an EF-Net-bearing model");
}

}  // namespace

Latent sample_step(const Latent& z_t, const Latent& eps_hat, int t, int t_next,
                   const NoiseSchedule& schedule, double eta, Rng& rng) {
    if (!(t > t_next && t_next >= 0 && t <= schedule.timesteps))
        throw ValidationError("sample_step: need T >= t > t_next >= 0");
    if (!z_t.data.same_shape(eps_hat.data)) throw ValidationError("sample_step: shape mismatch");
    const double a_t = schedule.alpha[t], s_t = schedule.sigma[t];
    const double a_n = schedule.alpha[t_next], s_n = schedule.sigma[t_next];

    double tau = 0.0;
    if (eta > 0.0 && t_next > 0) {
        const double ratio = a_t / a_n;  // < 1: alpha decreases in t
        tau = eta * (s_n / s_t) * std::sqrt(std::max(0.0, 1.0 - ratio * ratio));
    }
    const double dir = std::sqrt(std::max(0.0, s_n * s_n - tau * tau));

    Latent out;
    out.mode = z_t.mode;
    out.data = Tensor4(z_t.data.n, z_t.data.c, z_t.data.h, z_t.data.w);
    for (std::size_t i = 0; i < out.data.v.size(); ++i) {
        const double z0 = (z_t.data.v[i] - s_t * eps_hat.data.v[i]) / a_t;
        out.data.v[i] = a_n * z0 + dir * eps_hat.data.v[i];
    }
    if (tau > 0.0)
        for (auto& x : out.data.v) x += tau * rng.gaussian();
    return out;
}

Video sample(const DenoiserModel& model, const Tensor4& c_s, const Tensor4& c_e,
             const SamplerConfig& cfg, const NoiseSchedule& schedule) {
    validate_sampler(model, cfg, schedule);
    if (cfg.regime == SampleRegime::BD)
        throw ValidationError("sample: BD regime uses sample_bidirectional");

    const BackboneConfig& bc = model.cfg;
    Rng rng(cfg.seed);
    Latent z = gaussian_latent(bc.latent_frames, bc.latent_channels, bc.height, bc.width, rng);
    const std::vector<int> ts = sample_timesteps(schedule.timesteps, cfg.steps);

    const bool use_efnet = cfg.regime == SampleRegime::EFVI;
    const double scale_w =
        use_efnet ? (cfg.scale_w ? *cfg.scale_w : model.efnet->cfg.scale_w) : 1.0;
    DenoiseCache dc;
    EFNetCache ec;
    std::vector<Mat> feats;

    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        const int t = ts[i], tn = ts[i + 1];
        const Latent z_in = inject_boundary(z, &c_s, cfg.regime == SampleRegime::I2V ? nullptr : &c_e);
        const std::vector<Mat>* fp = nullptr;
        if (use_efnet) {
            feats = efnet_forward(model, c_e, z, scale_w, ec);
            fp = &feats;
        }
        const Latent eps_hat = denoise_predict(model, z_in, t, fp, dc);
        z = sample_step(z, eps_hat, t, tn, schedule, cfg.eta, rng);
    }
    return finalize_sample(z, c_s, c_e);
}

Video sample_bidirectional(const DenoiserModel& model, const Tensor4& c_s, const Tensor4& c_e,
                           const SamplerConfig& cfg, const NoiseSchedule& schedule) {
    validate_sampler(model, cfg, schedule);
    const BackboneConfig& bc = model.cfg;
    Rng rng(cfg.seed);
    Latent z = gaussian_latent(bc.latent_frames, bc.latent_channels, bc.height, bc.width, rng);
    const std::vector<int> ts = sample_timesteps(schedule.timesteps, cfg.steps);
    const int f = bc.latent_frames;
    DenoiseCache dc;

    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        const int t = ts[i], tn = ts[i + 1];

        // Start-conditioned branch on the forward latent.
        const Latent z_in_s = inject_boundary(z, &c_s, nullptr);
        const Latent eps_s = denoise_predict(model, z_in_s, t, nullptr, dc);
        const Latent z_s = sample_step(z, eps_s, t, tn, schedule, cfg.eta, rng);

        // End-conditioned branch on the temporally reversed latent: the end
        // frame is the first frame of the reversed video, so it takes the
        // start slot there.
        const Latent zf = flip(z);
        const Latent z_in_e = inject_boundary(zf, &c_e, nullptr);
        const Latent eps_e = denoise_predict(model, z_in_e, t, nullptr, dc);
        const Latent z_e = flip(sample_step(zf, eps_e, t, tn, schedule, cfg.eta, rng));

        Latent fused;
        fused.mode = z.mode;
        fused.data = Tensor4(f, z.data.c, z.data.h, z.data.w);
        const std::size_t plane = fused.data.frame_size();
        for (int k = 0; k < f; ++k) {
            const double lambda = cfg.fuse_kind == FuseKind::uniform
                                      ? cfg.fuse_lambda
                                      : (f > 1 ? static_cast<double>(k) / (f - 1) : 0.5);
            const double* ps = z_s.data.frame(k);
            const double* pe = z_e.data.frame(k);
            double* pf = fused.data.frame(k);
            for (std::size_t q = 0; q < plane; ++q)
                pf[q] = (1.0 - lambda) * ps[q] + lambda * pe[q];
        }
        z = std::move(fused);
    }
    return finalize_sample(z, c_s, c_e);
}

}  // namespace efvi
