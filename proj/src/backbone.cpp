// SPDX-License-Identifier: Apache-2.0
#include "efvi/backbone.hpp"

#include <cmath>

#include "efvi/common.hpp"

namespace efvi {

void BackboneConfig::validate() const {
    if (blocks < 1) throw ValidationError("backbone config: blocks must be >= 1");
    if (dim < 2 || dim % 2 != 0) throw ValidationError("backbone config: dim must be even and >= 2");
    if (heads < 1 || dim % heads != 0)
        throw ValidationError("backbone config: dim must be divisible by heads");
    if (patch < 1 || height % patch != 0 || width % patch != 0)
        throw ValidationError("backbone config: height and width must be divisible by patch");
    if (latent_frames < 1 || latent_channels < 1)
        throw ValidationError("backbone config: latent geometry must be positive");
    if (prediction_target != "epsilon")
        throw ValidationError("backbone config: unsupported prediction_target " + prediction_target);
}

nn::ParamRegistry DenoiserModel::params() {
    nn::ParamRegistry reg;
    patch_embed.register_params(reg, "backbone.patch_embed");
    pos.register_params(reg, "backbone.pos");
    temb.register_params(reg, "backbone.temb");
    for (std::size_t j = 0; j < blocks.size(); ++j)
        blocks[j].register_params(reg, "backbone.block" + std::to_string(j));
    head.register_params(reg, "backbone.head");
    if (efnet) {
        EFNet& e = *efnet;
        e.embed.register_params(reg, "efnet.embed");
        reg.push_back({"efnet.cond", &e.cond, &e.gcond, false});
        for (std::size_t j = 0; j < e.blocks.size(); ++j)
            e.blocks[j].register_params(reg, "efnet.block" + std::to_string(j));
        for (std::size_t j = 0; j < e.coeff.size(); ++j) {
            e.coeff[j].register_params(reg, "efnet.coeff" + std::to_string(j));
            e.fuse1[j].register_params(reg, "efnet.fuse" + std::to_string(j) + ".fc1");
            e.fuse2[j].register_params(reg, "efnet.fuse" + std::to_string(j) + ".fc2");
        }
        for (std::size_t j = 0; j < e.temporal.size(); ++j)
            reg.push_back({"efnet.temporal" + std::to_string(j), &e.temporal[j], &e.gtemporal[j], false});
    }
    return reg;
}

DenoiserModel init_model(const BackboneConfig& cfg, const std::optional<EFNetConfig>& efnet_cfg,
                         std::uint64_t seed) {
    cfg.validate();
    if (efnet_cfg) {
        if (efnet_cfg->blocks < 1 || efnet_cfg->blocks > cfg.blocks)
            throw ValidationError("efnet config: blocks (M) must be in [1, N]");
        if (!std::isfinite(efnet_cfg->scale_w)) throw ValidationError("efnet config: scale_w must be finite");
    }

    DenoiserModel model;
    model.cfg = cfg;
    Rng root(seed);
    Rng brng = root.stream("init.backbone");

    const int D = cfg.dim;
    model.patch_embed.init(cfg.token_in(), D, brng, 1.0 / std::sqrt(static_cast<double>(cfg.token_in())));
    model.pos.init(cfg.spatial_tokens(), cfg.latent_frames, D, brng, 0.02);
    model.temb.init(D, brng);
    model.blocks.resize(cfg.blocks);
    for (auto& blk : model.blocks) blk.init(D, cfg.heads, D, brng);
    model.head.init_zero(D, cfg.token_out());

    if (efnet_cfg) {
        Rng erng = root.stream("init.efnet");
        EFNet e;
        e.cfg = *efnet_cfg;
        const int tok_in = cfg.latent_channels * cfg.patch * cfg.patch;
        e.embed.init(tok_in, D, erng, 1.0 / std::sqrt(static_cast<double>(tok_in)));
        e.cond.resize(1, D);
        e.gcond.resize(1, D);
        e.blocks.resize(e.cfg.blocks);
        for (auto& blk : e.blocks) blk.init(D, cfg.heads, D, erng);
        e.coeff.resize(e.cfg.blocks);
        e.fuse1.resize(e.cfg.blocks);
        e.fuse2.resize(e.cfg.blocks);
        const int fuse_in = e.cfg.ablate_zt ? D : 2 * D;
        for (int j = 0; j < e.cfg.blocks; ++j) {
            e.coeff[j].init(D, cfg.latent_frames, erng, 1.0 / std::sqrt(static_cast<double>(D)));
            e.fuse1[j].init(fuse_in, 2 * D, erng, 1.0 / std::sqrt(static_cast<double>(fuse_in)));
            e.fuse2[j].init_zero(2 * D, D);  // fresh EF-Net contributes exactly nothing
        }
        if (e.cfg.use_temporal_embedding) {
            e.temporal.resize(e.cfg.blocks);
            e.gtemporal.resize(e.cfg.blocks);
            for (int j = 0; j < e.cfg.blocks; ++j) {
                e.temporal[j].resize(cfg.latent_frames, D);
                e.gtemporal[j].resize(cfg.latent_frames, D);
                for (auto& x : e.temporal[j].v) x = 0.02 * erng.gaussian();
            }
        }
        model.efnet = std::move(e);
    }

    // All parameters live on the float32 grid from the start.
    for (auto& p : model.params())
        for (auto& x : p.value->v) x = snap_f32(x);
    return model;
}

Latent inject_boundary(const Latent& z_t, const Tensor4* c_s, const Tensor4* c_e) {
    const Tensor4& z = z_t.data;
    Latent out;
    out.mode = z_t.mode;
    out.data = Tensor4(z.n, 3 * z.c, z.h, z.w);
    const std::size_t plane = static_cast<std::size_t>(z.c) * z.h * z.w;

    auto check_frame = [&](const Tensor4* frame, const char* which) {
        if (!frame) return;
        if (frame->n != 1 || 2 * frame->c != z.c || frame->h != z.h || frame->w != z.w)
            throw ValidationError(std::string("inject_boundary: ") + which +
                                  " frame geometry does not match the latent");
    };
    check_frame(c_s, "start");
    check_frame(c_e, "end");

    for (int k = 0; k < z.n; ++k) {
        const double* src = z.frame(k);
        double* dst = out.data.frame(k);
        std::copy(src, src + plane, dst);  // z_t slot; condition slots stay zero
    }
    if (c_s) {
        const Latent enc = encode_frame(*c_s);
        std::copy(enc.data.v.begin(), enc.data.v.end(), out.data.frame(0) + plane);
    }
    if (c_e) {
        const Latent enc = encode_frame(*c_e);
        std::copy(enc.data.v.begin(), enc.data.v.end(), out.data.frame(z.n - 1) + 2 * plane);
    }
    return out;
}

Latent denoise_predict(const DenoiserModel& model, const Latent& z_in, int t,
                       const std::vector<Mat>* efnet_features, DenoiseCache& cache) {
    const BackboneConfig& cfg = model.cfg;
    const Tensor4& z = z_in.data;
    if (z.n != cfg.latent_frames || z.c != cfg.inject_channels() || z.h != cfg.height ||
        z.w != cfg.width)
        throw ValidationError("denoise_predict: latent geometry does not match the model");
    const int M = model.has_efnet() ? model.efnet->cfg.blocks : 0;
    if (efnet_features) {
        if (static_cast<int>(efnet_features->size()) != M)
            throw ValidationError("denoise_predict: expected " + std::to_string(M) +
                                  " feature sequences, got " + std::to_string(efnet_features->size()));
        for (const Mat& f : *efnet_features)
            if (f.rows != cfg.seq_len() || f.cols != cfg.dim)
                throw ValidationError("denoise_predict: feature sequence shape mismatch");
    }

    nn::patchify_raw(z, cfg.patch, cache.tokens_raw);
    model.patch_embed.forward(cache.tokens_raw, cache.tokens);
    model.pos.add(cache.tokens);
    model.temb.forward(static_cast<double>(t), cache.cond, cache.temb);

    const int N = cfg.blocks;
    cache.acts.resize(N + 1);
    cache.bc.resize(N);
    cache.acts[0] = cache.tokens;
    for (int j = 0; j < N; ++j) {
        model.blocks[j].forward(cache.acts[j], cache.cond, cache.acts[j + 1], cache.bc[j]);
        if (efnet_features && j < M) add_inplace(cache.acts[j + 1], (*efnet_features)[j]);
    }
    model.head.forward(cache.acts[N], cache.out_tokens);

    Latent eps_hat;
    eps_hat.mode = z_in.mode;
    nn::unpatchify_raw(cache.out_tokens, cfg.patch, cfg.latent_frames, cfg.latent_channels,
                       cfg.height, cfg.width, eps_hat.data);
    return eps_hat;
}

void denoise_backward(DenoiserModel& model, const Tensor4& d_eps, DenoiseCache& cache,
                      std::vector<Mat>* d_features) {
    const BackboneConfig& cfg = model.cfg;
    const int N = cfg.blocks;
    const int M = model.has_efnet() ? model.efnet->cfg.blocks : 0;

    Mat d_out_tokens;
    nn::patchify_raw(d_eps, cfg.patch, d_out_tokens);  // adjoint of unpatchify
    model.head.backward(cache.acts[N], d_out_tokens, &cache.d_seq);

    if (cache.d_cond.rows != 1 || cache.d_cond.cols != cfg.dim) cache.d_cond.resize(1, cfg.dim);
    cache.d_cond.zero();
    if (d_features) d_features->resize(M);

    for (int j = N - 1; j >= 0; --j) {
        if (d_features && j < M) (*d_features)[j] = cache.d_seq;
        model.blocks[j].backward(cache.d_seq, cache.cond, cache.bc[j], cache.d_prev, cache.d_cond);
        std::swap(cache.d_seq, cache.d_prev);
    }
    model.pos.backward(cache.d_seq);
    model.patch_embed.backward(cache.tokens_raw, cache.d_seq, nullptr);
    model.temb.backward(cache.d_cond, cache.temb);
}

}  // namespace efvi
