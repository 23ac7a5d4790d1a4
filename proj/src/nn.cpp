// SPDX-License-Identifier: Apache-2.0
#include "efvi/nn.hpp"

#include <cassert>
#include <cmath>

#include <Eigen/Dense>

#include "efvi/common.hpp"

namespace efvi::nn {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;

Map emap(Mat& m) { return Map(m.data(), m.rows, m.cols); }
CMap emap(const Mat& m) { return CMap(m.data(), m.rows, m.cols); }

void ensure(Mat& m, int rows, int cols) {
    if (m.rows != rows || m.cols != cols) m.resize(rows, cols);
}

constexpr double kLnEps = 1e-6;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

void matmul(const Mat& a, const Mat& b, Mat& c, bool trans_a, bool trans_b, bool accumulate) {
    const int m = trans_a ? a.cols : a.rows;
    const int k = trans_a ? a.rows : a.cols;
    const int n = trans_b ? b.rows : b.cols;
    assert((trans_b ? b.cols : b.rows) == k);
    ensure(c, m, n);
    auto run = [&](auto&& lhs, auto&& rhs) {
        if (accumulate)
            emap(c).noalias() += lhs * rhs;
        else
            emap(c).noalias() = lhs * rhs;
    };
    if (!trans_a && !trans_b) run(emap(a), emap(b));
    else if (trans_a && !trans_b) run(emap(a).transpose(), emap(b));
    else if (!trans_a && trans_b) run(emap(a), emap(b).transpose());
    else run(emap(a).transpose(), emap(b).transpose());
}

void zero_grads(ParamRegistry& params) {
    for (auto& p : params) p.grad->zero();
}

// ---------------------------------------------------------------- Linear

void Linear::init(int in_dim, int out_dim, Rng& rng, double std) {
    in = in_dim;
    out = out_dim;
    w.resize(in, out);
    b.resize(1, out);
    gw.resize(in, out);
    gb.resize(1, out);
    for (auto& x : w.v) x = std * rng.gaussian();
}

void Linear::init_zero(int in_dim, int out_dim) {
    in = in_dim;
    out = out_dim;
    w.resize(in, out);
    b.resize(1, out);
    gw.resize(in, out);
    gb.resize(1, out);
}

void Linear::forward(const Mat& x, Mat& y) const {
    assert(x.cols == in);
    ensure(y, x.rows, out);
    emap(y).noalias() = emap(x) * emap(w);
    emap(y).rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data(), out);
}

void Linear::backward(const Mat& x, const Mat& dy, Mat* dx) {
    emap(gw).noalias() += emap(x).transpose() * emap(dy);
    Eigen::Map<Eigen::RowVectorXd>(gb.data(), out) += emap(dy).colwise().sum();
    if (dx) {
        ensure(*dx, x.rows, in);
        emap(*dx).noalias() = emap(dy) * emap(w).transpose();
    }
}

void Linear::register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.push_back({prefix + ".w", &w, &gw, true});
    reg.push_back({prefix + ".b", &b, &gb, false});
}

// ------------------------------------------------------------- LayerNorm

void layer_norm(const Mat& x, Mat& y, LayerNormCache& cache) {
    const int R = x.rows, C = x.cols;
    ensure(y, R, C);
    ensure(cache.xhat, R, C);
    cache.rstd.resize(R);
    for (int r = 0; r < R; ++r) {
        const double* xr = x.row(r);
        double mean = 0.0;
        for (int c = 0; c < C; ++c) mean += xr[c];
        mean /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) {
            const double d = xr[c] - mean;
            var += d * d;
        }
        var /= C;
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        cache.rstd[r] = rstd;
        double* yr = y.row(r);
        double* hr = cache.xhat.row(r);
        for (int c = 0; c < C; ++c) {
            hr[c] = (xr[c] - mean) * rstd;
            yr[c] = hr[c];
        }
    }
}

void layer_norm_backward(const Mat& dy, const LayerNormCache& cache, Mat& dx) {
    const int R = dy.rows, C = dy.cols;
    ensure(dx, R, C);
    for (int r = 0; r < R; ++r) {
        const double* dyr = dy.row(r);
        const double* hr = cache.xhat.row(r);
        double mean_dy = 0.0, mean_dyh = 0.0;
        for (int c = 0; c < C; ++c) {
            mean_dy += dyr[c];
            mean_dyh += dyr[c] * hr[c];
        }
        mean_dy /= C;
        mean_dyh /= C;
        const double rstd = cache.rstd[r];
        double* dxr = dx.row(r);
        for (int c = 0; c < C; ++c)
            dxr[c] = rstd * (dyr[c] - mean_dy - hr[c] * mean_dyh);
    }
}

// ----------------------------------------------------------- activations

void gelu(const Mat& x, Mat& y) {
    ensure(y, x.rows, x.cols);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const double v = x.v[i];
        const double u = kGeluC * (v + 0.044715 * v * v * v);
        y.v[i] = 0.5 * v * (1.0 + std::tanh(u));
    }
}

void gelu_backward(const Mat& x, const Mat& dy, Mat& dx) {
    ensure(dx, x.rows, x.cols);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const double v = x.v[i];
        const double u = kGeluC * (v + 0.044715 * v * v * v);
        const double th = std::tanh(u);
        const double du = kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
        dx.v[i] = dy.v[i] * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du);
    }
}

void silu(const Mat& x, Mat& y) {
    ensure(y, x.rows, x.cols);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const double v = x.v[i];
        y.v[i] = v / (1.0 + std::exp(-v));
    }
}

void silu_backward(const Mat& x, const Mat& dy, Mat& dx) {
    ensure(dx, x.rows, x.cols);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const double v = x.v[i];
        const double s = 1.0 / (1.0 + std::exp(-v));
        dx.v[i] = dy.v[i] * s * (1.0 + v * (1.0 - s));
    }
}

// ------------------------------------------------------------- Attention

void Attention::init(int dim_, int heads_, Rng& rng) {
    dim = dim_;
    heads = heads_;
    if (dim % heads != 0) throw ValidationError("attention: dim must be divisible by heads");
    qkv.init(dim, 3 * dim, rng, 1.0 / std::sqrt(static_cast<double>(dim)));
    proj.init(dim, dim, rng, 1.0 / std::sqrt(static_cast<double>(dim)));
}

namespace {

// View of one head inside a packed S x (3*dim) or S x dim buffer.
using StrideMap = Eigen::Map<EMat, 0, Eigen::OuterStride<>>;
using CStrideMap = Eigen::Map<const EMat, 0, Eigen::OuterStride<>>;

CStrideMap head_view(const Mat& m, int col0, int rows, int cols) {
    return CStrideMap(m.data() + col0, rows, cols, Eigen::OuterStride<>(m.cols));
}
StrideMap head_view(Mat& m, int col0, int rows, int cols) {
    return StrideMap(m.data() + col0, rows, cols, Eigen::OuterStride<>(m.cols));
}

}  // namespace

void Attention::forward(const Mat& x, Mat& y, Cache& cache) const {
    const int S = x.rows;
    const int hd = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    qkv.forward(x, cache.qkv_out);
    ensure(cache.attn_out, S, dim);
    cache.probs.resize(heads);
    for (int h = 0; h < heads; ++h) {
        auto q = head_view(static_cast<const Mat&>(cache.qkv_out), h * hd, S, hd);
        auto k = head_view(static_cast<const Mat&>(cache.qkv_out), dim + h * hd, S, hd);
        auto v = head_view(static_cast<const Mat&>(cache.qkv_out), 2 * dim + h * hd, S, hd);
        Mat& p = cache.probs[h];
        ensure(p, S, S);
        emap(p).noalias() = q * k.transpose() * scale;
        for (int r = 0; r < S; ++r) {
            double* pr = p.row(r);
            double mx = pr[0];
            for (int c = 1; c < S; ++c) mx = std::max(mx, pr[c]);
            double sum = 0.0;
            for (int c = 0; c < S; ++c) {
                pr[c] = std::exp(pr[c] - mx);
                sum += pr[c];
            }
            const double inv = 1.0 / sum;
            for (int c = 0; c < S; ++c) pr[c] *= inv;
        }
        head_view(cache.attn_out, h * hd, S, hd).noalias() = emap(p) * v;
    }
    proj.forward(cache.attn_out, y);
}

void Attention::backward(const Mat& x, const Mat& dy, Cache& cache, Mat& dx) {
    const int S = x.rows;
    const int hd = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    proj.backward(cache.attn_out, dy, &cache.d_attn);
    ensure(cache.d_qkv, S, 3 * dim);
    Mat dp(S, S), ds(S, S);
    for (int h = 0; h < heads; ++h) {
        auto q = head_view(static_cast<const Mat&>(cache.qkv_out), h * hd, S, hd);
        auto k = head_view(static_cast<const Mat&>(cache.qkv_out), dim + h * hd, S, hd);
        auto v = head_view(static_cast<const Mat&>(cache.qkv_out), 2 * dim + h * hd, S, hd);
        auto dO = head_view(static_cast<const Mat&>(cache.d_attn), h * hd, S, hd);
        const Mat& p = cache.probs[h];

        emap(dp).noalias() = dO * v.transpose();
        // softmax backward: ds = p .* (dp - rowsum(dp .* p))
        for (int r = 0; r < S; ++r) {
            const double* pr = p.row(r);
            const double* dpr = dp.row(r);
            double dot = 0.0;
            for (int c = 0; c < S; ++c) dot += dpr[c] * pr[c];
            double* dsr = ds.row(r);
            for (int c = 0; c < S; ++c) dsr[c] = pr[c] * (dpr[c] - dot);
        }
        head_view(cache.d_qkv, 2 * dim + h * hd, S, hd).noalias() = emap(p).transpose() * dO;
        head_view(cache.d_qkv, h * hd, S, hd).noalias() = emap(ds) * k * scale;
        head_view(cache.d_qkv, dim + h * hd, S, hd).noalias() = emap(ds).transpose() * q * scale;
    }
    qkv.backward(x, cache.d_qkv, &dx);
}

void Attention::register_params(ParamRegistry& reg, const std::string& prefix) {
    qkv.register_params(reg, prefix + ".qkv");
    proj.register_params(reg, prefix + ".proj");
}

// ------------------------------------------------------------------ Mlp

void Mlp::init(int dim, int hidden, Rng& rng) {
    fc1.init(dim, hidden, rng, 1.0 / std::sqrt(static_cast<double>(dim)));
    fc2.init(hidden, dim, rng, 1.0 / std::sqrt(static_cast<double>(hidden)));
}

void Mlp::forward(const Mat& x, Mat& y, Cache& cache) const {
    fc1.forward(x, cache.h_pre);
    gelu(cache.h_pre, cache.h_act);
    fc2.forward(cache.h_act, y);
}

void Mlp::backward(const Mat& x, const Mat& dy, Cache& cache, Mat& dx) {
    fc2.backward(cache.h_act, dy, &cache.d_act);
    gelu_backward(cache.h_pre, cache.d_act, cache.d_pre);
    fc1.backward(x, cache.d_pre, &dx);
}

void Mlp::register_params(ParamRegistry& reg, const std::string& prefix) {
    fc1.register_params(reg, prefix + ".fc1");
    fc2.register_params(reg, prefix + ".fc2");
}

// ------------------------------------------------------------- DiTBlock

void DiTBlock::init(int dim_, int heads, int cond_dim, Rng& rng) {
    dim = dim_;
    mod.init_zero(cond_dim, 6 * dim);
    attn.init(dim, heads, rng);
    mlp.init(dim, 4 * dim, rng);
}

namespace {

// y = xhat .* (1 + gamma) + beta, with gamma/beta broadcast over rows.
void modulate(const Mat& xhat, const double* gamma, const double* beta, Mat& y) {
    ensure(y, xhat.rows, xhat.cols);
    for (int r = 0; r < xhat.rows; ++r) {
        const double* xr = xhat.row(r);
        double* yr = y.row(r);
        for (int c = 0; c < xhat.cols; ++c) yr[c] = xr[c] * (1.0 + gamma[c]) + beta[c];
    }
}

}  // namespace

void DiTBlock::forward(const Mat& x, const Mat& cond, Mat& y, Cache& cache) const {
    silu(cond, cache.cond_silu);
    mod.forward(cache.cond_silu, cache.m);
    const double* g1v = cache.m.data();          // gamma1
    const double* b1v = cache.m.data() + dim;    // beta1
    const double* s1v = cache.m.data() + 2 * dim;  // gate1
    const double* g2v = cache.m.data() + 3 * dim;
    const double* b2v = cache.m.data() + 4 * dim;
    const double* s2v = cache.m.data() + 5 * dim;

    Mat ln_out;
    layer_norm(x, ln_out, cache.ln1);
    modulate(cache.ln1.xhat, g1v, b1v, cache.h1);
    attn.forward(cache.h1, cache.a, cache.attn);
    ensure(cache.x1, x.rows, dim);
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        const double* ar = cache.a.row(r);
        double* x1r = cache.x1.row(r);
        for (int c = 0; c < dim; ++c) x1r[c] = xr[c] + s1v[c] * ar[c];
    }
    layer_norm(cache.x1, ln_out, cache.ln2);
    modulate(cache.ln2.xhat, g2v, b2v, cache.h2);
    mlp.forward(cache.h2, cache.f, cache.mlp);
    ensure(y, x.rows, dim);
    for (int r = 0; r < x.rows; ++r) {
        const double* x1r = cache.x1.row(r);
        const double* fr = cache.f.row(r);
        double* yr = y.row(r);
        for (int c = 0; c < dim; ++c) yr[c] = x1r[c] + s2v[c] * fr[c];
    }
}

void DiTBlock::backward(const Mat& dy, const Mat& cond, Cache& cache, Mat& dx, Mat& dcond) {
    const int R = dy.rows;
    const double* g1v = cache.m.data();
    const double* s1v = cache.m.data() + 2 * dim;
    const double* g2v = cache.m.data() + 3 * dim;
    const double* s2v = cache.m.data() + 5 * dim;

    ensure(cache.d_m, 1, 6 * dim);
    cache.d_m.zero();
    double* d_g1 = cache.d_m.data();
    double* d_b1 = cache.d_m.data() + dim;
    double* d_s1 = cache.d_m.data() + 2 * dim;
    double* d_g2 = cache.d_m.data() + 3 * dim;
    double* d_b2 = cache.d_m.data() + 4 * dim;
    double* d_s2 = cache.d_m.data() + 5 * dim;

    // y = x1 + s2 .* f
    ensure(cache.d_branch, R, dim);
    for (int r = 0; r < R; ++r) {
        const double* dyr = dy.row(r);
        const double* fr = cache.f.row(r);
        double* dbr = cache.d_branch.row(r);
        for (int c = 0; c < dim; ++c) {
            d_s2[c] += dyr[c] * fr[c];
            dbr[c] = dyr[c] * s2v[c];
        }
    }
    mlp.backward(cache.h2, cache.d_branch, cache.mlp, cache.d_h2);
    // h2 = xhat2 .* (1 + g2) + b2
    for (int r = 0; r < R; ++r) {
        const double* dhr = cache.d_h2.row(r);
        const double* xr = cache.ln2.xhat.row(r);
        double* mr = cache.d_h2.row(r);
        for (int c = 0; c < dim; ++c) {
            d_g2[c] += dhr[c] * xr[c];
            d_b2[c] += dhr[c];
            mr[c] = dhr[c] * (1.0 + g2v[c]);
        }
    }
    layer_norm_backward(cache.d_h2, cache.ln2, cache.d_x1);
    add_inplace(cache.d_x1, dy);  // residual

    // x1 = x + s1 .* a
    for (int r = 0; r < R; ++r) {
        const double* dxr = cache.d_x1.row(r);
        const double* ar = cache.a.row(r);
        double* dbr = cache.d_branch.row(r);
        for (int c = 0; c < dim; ++c) {
            d_s1[c] += dxr[c] * ar[c];
            dbr[c] = dxr[c] * s1v[c];
        }
    }
    attn.backward(cache.h1, cache.d_branch, cache.attn, cache.d_h1);
    for (int r = 0; r < R; ++r) {
        const double* dhr = cache.d_h1.row(r);
        const double* xr = cache.ln1.xhat.row(r);
        double* mr = cache.d_h1.row(r);
        for (int c = 0; c < dim; ++c) {
            d_g1[c] += dhr[c] * xr[c];
            d_b1[c] += dhr[c];
            mr[c] = dhr[c] * (1.0 + g1v[c]);
        }
    }
    layer_norm_backward(cache.d_h1, cache.ln1, dx);
    add_inplace(dx, cache.d_x1);  // residual

    mod.backward(cache.cond_silu, cache.d_m, &cache.d_cond_silu);
    silu_backward(cond, cache.d_cond_silu, cache.scratch);
    add_inplace(dcond, cache.scratch);
}

void DiTBlock::register_params(ParamRegistry& reg, const std::string& prefix) {
    mod.register_params(reg, prefix + ".mod");
    attn.register_params(reg, prefix + ".attn");
    mlp.register_params(reg, prefix + ".mlp");
}

// -------------------------------------------------------- TimestepEmbed

void TimestepEmbed::init(int dim_, Rng& rng) {
    dim = dim_;
    if (dim % 2 != 0) throw ValidationError("timestep embedding dim must be even");
    fc1.init(dim, dim, rng, 1.0 / std::sqrt(static_cast<double>(dim)));
    fc2.init(dim, dim, rng, 1.0 / std::sqrt(static_cast<double>(dim)));
}

void TimestepEmbed::forward(double t, Mat& cond, Cache& cache) const {
    const int half = dim / 2;
    ensure(cache.sinusoid, 1, dim);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        cache.sinusoid.v[i] = std::cos(t * freq);
        cache.sinusoid.v[half + i] = std::sin(t * freq);
    }
    fc1.forward(cache.sinusoid, cache.h_pre);
    silu(cache.h_pre, cache.h_act);
    fc2.forward(cache.h_act, cond);
}

void TimestepEmbed::backward(const Mat& dcond, Cache& cache) {
    fc2.backward(cache.h_act, dcond, &cache.d_act);
    silu_backward(cache.h_pre, cache.d_act, cache.d_pre);
    fc1.backward(cache.sinusoid, cache.d_pre, nullptr);
}

void TimestepEmbed::register_params(ParamRegistry& reg, const std::string& prefix) {
    fc1.register_params(reg, prefix + ".fc1");
    fc2.register_params(reg, prefix + ".fc2");
}

// ------------------------------------------------------------- PosEmbed

void PosEmbed::init(int spatial_tokens, int frames, int dim, Rng& rng, double std) {
    spatial.resize(spatial_tokens, dim);
    temporal.resize(frames, dim);
    gs.resize(spatial_tokens, dim);
    gt.resize(frames, dim);
    for (auto& x : spatial.v) x = std * rng.gaussian();
    for (auto& x : temporal.v) x = std * rng.gaussian();
}

void PosEmbed::add(Mat& tokens) const {
    const int Ls = spatial.rows, f = temporal.rows, D = spatial.cols;
    assert(tokens.rows == Ls * f && tokens.cols == D);
    for (int k = 0; k < f; ++k)
        for (int l = 0; l < Ls; ++l) {
            double* tr = tokens.row(k * Ls + l);
            const double* sr = spatial.row(l);
            const double* fr = temporal.row(k);
            for (int c = 0; c < D; ++c) tr[c] += sr[c] + fr[c];
        }
}

void PosEmbed::backward(const Mat& d_tokens) {
    const int Ls = spatial.rows, f = temporal.rows, D = spatial.cols;
    for (int k = 0; k < f; ++k)
        for (int l = 0; l < Ls; ++l) {
            const double* dr = d_tokens.row(k * Ls + l);
            double* sr = gs.row(l);
            double* fr = gt.row(k);
            for (int c = 0; c < D; ++c) {
                sr[c] += dr[c];
                fr[c] += dr[c];
            }
        }
}

void PosEmbed::register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.push_back({prefix + ".spatial", &spatial, &gs, false});
    reg.push_back({prefix + ".temporal", &temporal, &gt, false});
}

// ------------------------------------------------------------- patchify

void patchify_raw(const Tensor4& t, int p, Mat& out) {
    if (t.h % p != 0 || t.w % p != 0)
        throw ValidationError("patchify: spatial extent not divisible by patch size");
    const int gh = t.h / p, gw = t.w / p;
    ensure(out, t.n * gh * gw, t.c * p * p);
    for (int n = 0; n < t.n; ++n)
        for (int py = 0; py < gh; ++py)
            for (int px = 0; px < gw; ++px) {
                double* row = out.row((n * gh + py) * gw + px);
                for (int c = 0; c < t.c; ++c)
                    for (int dy = 0; dy < p; ++dy)
                        for (int dx = 0; dx < p; ++dx)
                            row[(c * p + dy) * p + dx] = t.at(n, c, py * p + dy, px * p + dx);
            }
}

void unpatchify_raw(const Mat& tokens, int p, int n, int c, int h, int w, Tensor4& out) {
    const int gh = h / p, gw = w / p;
    if (tokens.rows != n * gh * gw || tokens.cols != c * p * p)
        throw ValidationError("unpatchify: token count mismatch");
    out = Tensor4(n, c, h, w);
    for (int i = 0; i < n; ++i)
        for (int py = 0; py < gh; ++py)
            for (int px = 0; px < gw; ++px) {
                const double* row = tokens.row((i * gh + py) * gw + px);
                for (int cc = 0; cc < c; ++cc)
                    for (int dy = 0; dy < p; ++dy)
                        for (int dx = 0; dx < p; ++dx)
                            out.at(i, cc, py * p + dy, px * p + dx) = row[(cc * p + dy) * p + dx];
            }
}

// ---------------------------------------------------------------- AdamW

void AdamW::step(ParamRegistry& params, double lr) {
    if (m.size() != params.size()) {
        m.assign(params.size(), Mat());
        v.assign(params.size(), Mat());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i].resize(params[i].value->rows, params[i].value->cols);
            v[i].resize(params[i].value->rows, params[i].value->cols);
        }
    }
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Mat& w = *params[i].value;
        const Mat& g = *params[i].grad;
        const double wd = params[i].decay ? weight_decay : 0.0;
        for (std::size_t j = 0; j < w.v.size(); ++j) {
            const double gj = g.v[j];
            m[i].v[j] = beta1 * m[i].v[j] + (1.0 - beta1) * gj;
            v[i].v[j] = beta2 * v[i].v[j] + (1.0 - beta2) * gj * gj;
            const double mhat = m[i].v[j] / bc1;
            const double vhat = v[i].v[j] / bc2;
            const double upd = mhat / (std::sqrt(vhat) + eps) + wd * w.v[j];
            // Parameters stay on the float32 grid so checkpoints round-trip
            // bit-exactly.
            w.v[j] = snap_f32(w.v[j] - lr * upd);
        }
    }
}

}  // namespace efvi::nn
