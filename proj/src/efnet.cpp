// SPDX-License-Identifier: Apache-2.0
#include "efvi/efnet.hpp"

#include "efvi/common.hpp"

namespace efvi {

Mat embed_end_frame(const DenoiserModel& model, const Tensor4& c_e) {
    if (!model.has_efnet()) throw ValidationError("embed_end_frame: model has no EF-Net");
    if (c_e.n != 1 || 2 * c_e.c != model.cfg.latent_channels || c_e.h != model.cfg.height ||
        c_e.w != model.cfg.width)
        throw ValidationError("embed_end_frame: frame geometry does not match the model");
    const Latent lat = encode_frame(c_e);
    Mat raw, out;
    nn::patchify_raw(lat.data, model.cfg.patch, raw);
    model.efnet->embed.forward(raw, out);
    return out;
}

void temporal_expand(const Mat& tokens, const nn::Linear& proj, const Mat* temporal_emb,
                     Mat& coeffs, Mat& expanded) {
    const int L = tokens.rows, D = tokens.cols, f = proj.out;
    proj.forward(tokens, coeffs);  // L x f
    if (expanded.rows != L * f || expanded.cols != D) expanded.resize(L * f, D);
    for (int k = 0; k < f; ++k)
        for (int l = 0; l < L; ++l) {
            const double c = coeffs(l, k);
            const double* tr = tokens.row(l);
            double* er = expanded.row(k * L + l);
            for (int d = 0; d < D; ++d) er[d] = c * tr[d];
        }
    if (temporal_emb) {
        if (temporal_emb->rows != f || temporal_emb->cols != D)
            throw ValidationError("temporal_expand: temporal embedding shape mismatch");
        for (int k = 0; k < f; ++k) {
            const double* ek = temporal_emb->row(k);
            for (int l = 0; l < L; ++l) {
                double* er = expanded.row(k * L + l);
                for (int d = 0; d < D; ++d) er[d] += ek[d];
            }
        }
    }
}

void temporal_expand_backward(const Mat& tokens, nn::Linear& proj, const Mat& coeffs,
                              const Mat& d_expanded, Mat& d_tokens, Mat* d_temporal_emb) {
    const int L = tokens.rows, D = tokens.cols, f = proj.out;
    Mat d_coeffs(L, f);
    for (int k = 0; k < f; ++k)
        for (int l = 0; l < L; ++l) {
            const double* dr = d_expanded.row(k * L + l);
            const double* tr = tokens.row(l);
            double* dt = d_tokens.row(l);
            const double c = coeffs(l, k);
            double dot = 0.0;
            for (int d = 0; d < D; ++d) {
                dot += dr[d] * tr[d];
                dt[d] += c * dr[d];
            }
            d_coeffs(l, k) = dot;
            if (d_temporal_emb) {
                double* de = d_temporal_emb->row(k);
                for (int d = 0; d < D; ++d) de[d] += dr[d];
            }
        }
    Mat d_from_proj;
    proj.backward(tokens, d_coeffs, &d_from_proj);
    add_inplace(d_tokens, d_from_proj);
}

std::vector<Mat> efnet_forward(const DenoiserModel& model, const Tensor4& c_e, const Latent& z_t,
                               double scale_w, EFNetCache& cache) {
    if (!model.has_efnet()) throw ValidationError("efnet_forward: model has no EF-Net");
    const EFNet& e = *model.efnet;
    const BackboneConfig& cfg = model.cfg;
    const int M = e.cfg.blocks;
    const int D = cfg.dim;
    const int S = cfg.seq_len();

    // F_0 from the end frame.
    const Latent ce_lat = encode_frame(c_e);
    nn::patchify_raw(ce_lat.data, cfg.patch, cache.f0_raw);
    cache.f.resize(M + 1);
    e.embed.forward(cache.f0_raw, cache.f[0]);

    // z_t tokens through the backbone patch embedding restricted to the z_t
    // channel slot (weight-tied: this is the embedding of [z_t | 0 | 0]).
    const Latent zt_only = inject_boundary(z_t, nullptr, nullptr);
    nn::patchify_raw(zt_only.data, cfg.patch, cache.zt_raw);
    model.patch_embed.forward(cache.zt_raw, cache.zt_tokens);

    cache.bc.resize(M);
    cache.coeffs.resize(M);
    cache.expanded.resize(M);
    cache.fuse_in.resize(M);
    cache.h_pre.resize(M);
    cache.h_act.resize(M);

    std::vector<Mat> features(M);
    for (int j = 0; j < M; ++j) {
        e.blocks[j].forward(cache.f[j], e.cond, cache.f[j + 1], cache.bc[j]);
        const Mat* emb = e.cfg.use_temporal_embedding ? &e.temporal[j] : nullptr;
        temporal_expand(cache.f[j + 1], e.coeff[j], emb, cache.coeffs[j], cache.expanded[j]);

        Mat& fin = cache.fuse_in[j];
        if (e.cfg.ablate_zt) {
            fin = cache.expanded[j];
        } else {
            if (fin.rows != S || fin.cols != 2 * D) fin.resize(S, 2 * D);
            for (int r = 0; r < S; ++r) {
                double* dst = fin.row(r);
                const double* a = cache.expanded[j].row(r);
                const double* b = cache.zt_tokens.row(r);
                std::copy(a, a + D, dst);
                std::copy(b, b + D, dst + D);
            }
        }
        e.fuse1[j].forward(fin, cache.h_pre[j]);
        nn::gelu(cache.h_pre[j], cache.h_act[j]);
        e.fuse2[j].forward(cache.h_act[j], features[j]);
        for (auto& x : features[j].v) x *= scale_w;
    }
    return features;
}

void efnet_backward(DenoiserModel& model, const std::vector<Mat>& d_features, double scale_w,
                    EFNetCache& cache) {
    EFNet& e = *model.efnet;
    const BackboneConfig& cfg = model.cfg;
    const int M = e.cfg.blocks;
    const int D = cfg.dim;
    const int S = cfg.seq_len();
    const int L = cfg.spatial_tokens();

    if (cache.d_zt.rows != S || cache.d_zt.cols != D) cache.d_zt.resize(S, D);
    cache.d_zt.zero();
    if (cache.d_chain.rows != L || cache.d_chain.cols != D) cache.d_chain.resize(L, D);
    cache.d_chain.zero();

    for (int j = M - 1; j >= 0; --j) {
        cache.d_feat = d_features[j];
        for (auto& x : cache.d_feat.v) x *= scale_w;
        e.fuse2[j].backward(cache.h_act[j], cache.d_feat, &cache.d_act);
        nn::gelu_backward(cache.h_pre[j], cache.d_act, cache.d_pre);
        e.fuse1[j].backward(cache.fuse_in[j], cache.d_pre, &cache.d_fuse_in);

        if (e.cfg.ablate_zt) {
            cache.d_expanded = cache.d_fuse_in;
        } else {
            if (cache.d_expanded.rows != S || cache.d_expanded.cols != D)
                cache.d_expanded.resize(S, D);
            for (int r = 0; r < S; ++r) {
                const double* src = cache.d_fuse_in.row(r);
                std::copy(src, src + D, cache.d_expanded.row(r));
                double* dz = cache.d_zt.row(r);
                for (int d = 0; d < D; ++d) dz[d] += src[D + d];
            }
        }

        // Total gradient on f[j+1]: expansion + coefficients + downstream chain.
        if (cache.d_total.rows != L || cache.d_total.cols != D) cache.d_total.resize(L, D);
        cache.d_total = cache.d_chain;
        Mat* d_emb = e.cfg.use_temporal_embedding ? &e.gtemporal[j] : nullptr;
        temporal_expand_backward(cache.f[j + 1], e.coeff[j], cache.coeffs[j], cache.d_expanded,
                                 cache.d_total, d_emb);
        e.blocks[j].backward(cache.d_total, e.cond, cache.bc[j], cache.d_prev, e.gcond);
        std::swap(cache.d_chain, cache.d_prev);
    }
    e.embed.backward(cache.f0_raw, cache.d_chain, nullptr);
    // Tied z_t embedding: gradient lands on the backbone patch embedding.
    model.patch_embed.backward(cache.zt_raw, cache.d_zt, nullptr);
}

}  // namespace efvi
