// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "efvi/rng.hpp"
#include "efvi/tensor.hpp"

namespace efvi::nn {

// Forward passes are const and keep their activations in caller-owned cache
// structs, so a frozen model can run on many threads at once. Backward
// passes accumulate into the layer's grad tensors and must be exclusive.

struct ParamRef {
    std::string name;
    Mat* value;
    Mat* grad;
    bool decay;  // weight matrices only; biases and tables are not decayed
};
using ParamRegistry = std::vector<ParamRef>;

void zero_grads(ParamRegistry& params);

struct Linear {
    int in = 0, out = 0;
    Mat w;   // in x out
    Mat b;   // 1 x out
    Mat gw, gb;

    void init(int in_dim, int out_dim, Rng& rng, double std);
    void init_zero(int in_dim, int out_dim);

    // y = x w + b, x is rows x in.
    void forward(const Mat& x, Mat& y) const;
    // Accumulates gw/gb; writes dx (overwrite) when non-null.
    void backward(const Mat& x, const Mat& dy, Mat* dx);
    void register_params(ParamRegistry& reg, const std::string& prefix);
};

// LayerNorm over the feature dimension, no learned affine (modulation
// supplies scale/shift).
struct LayerNormCache {
    Mat xhat;                  // normalized output
    std::vector<double> rstd;  // per row
};
void layer_norm(const Mat& x, Mat& y, LayerNormCache& cache);
void layer_norm_backward(const Mat& dy, const LayerNormCache& cache, Mat& dx);

void gelu(const Mat& x, Mat& y);
void gelu_backward(const Mat& x, const Mat& dy, Mat& dx);
void silu(const Mat& x, Mat& y);
void silu_backward(const Mat& x, const Mat& dy, Mat& dx);

struct Attention {
    int dim = 0, heads = 1;
    Linear qkv;   // dim -> 3 dim
    Linear proj;  // dim -> dim

    struct Cache {
        Mat qkv_out;             // S x 3 dim
        std::vector<Mat> probs;  // per head, S x S
        Mat attn_out;            // S x dim
        Mat d_qkv, d_attn;       // backward scratch
    };

    void init(int dim_, int heads_, Rng& rng);
    void forward(const Mat& x, Mat& y, Cache& cache) const;
    void backward(const Mat& x, const Mat& dy, Cache& cache, Mat& dx);
    void register_params(ParamRegistry& reg, const std::string& prefix);
};

struct Mlp {
    Linear fc1, fc2;  // dim -> mult*dim -> dim

    struct Cache {
        Mat h_pre, h_act;
        Mat d_act, d_pre;
    };

    void init(int dim, int hidden, Rng& rng);
    void forward(const Mat& x, Mat& y, Cache& cache) const;
    void backward(const Mat& x, const Mat& dy, Cache& cache, Mat& dx);
    void register_params(ParamRegistry& reg, const std::string& prefix);
};

// Pre-norm transformer block with adaptive layer-norm modulation and gated
// residuals. The modulation projection is zero-initialized, so a fresh block
// is the identity.
struct DiTBlock {
    int dim = 0;
    Linear mod;  // cond_dim -> 6*dim: scale/shift/gate for each sub-layer
    Attention attn;
    Mlp mlp;

    struct Cache {
        Mat cond_silu, m;
        LayerNormCache ln1, ln2;
        Mat h1, a, x1, h2, f;
        Attention::Cache attn;
        Mlp::Cache mlp;
        Mat d_h1, d_h2, d_branch, d_x1, d_m, d_cond_silu, scratch;
    };

    void init(int dim_, int heads, int cond_dim, Rng& rng);
    void forward(const Mat& x, const Mat& cond, Mat& y, Cache& cache) const;
    // dcond accumulates (the conditioning vector feeds every block).
    void backward(const Mat& dy, const Mat& cond, Cache& cache, Mat& dx, Mat& dcond);
    void register_params(ParamRegistry& reg, const std::string& prefix);
};

// Sinusoidal timestep features followed by a two-layer MLP.
struct TimestepEmbed {
    int dim = 0;
    Linear fc1, fc2;

    struct Cache {
        Mat sinusoid, h_pre, h_act;
        Mat d_act, d_pre;
    };

    void init(int dim_, Rng& rng);
    void forward(double t, Mat& cond, Cache& cache) const;
    void backward(const Mat& dcond, Cache& cache);
    void register_params(ParamRegistry& reg, const std::string& prefix);
};

// Learned additive positional embedding, one spatial table shared by all
// latent frames plus one temporal table.
struct PosEmbed {
    Mat spatial;  // Ls x D
    Mat temporal; // f x D
    Mat gs, gt;

    void init(int spatial_tokens, int frames, int dim, Rng& rng, double std);
    void add(Mat& tokens) const;  // tokens are (f*Ls) x D, frame-major
    void backward(const Mat& d_tokens);
    void register_params(ParamRegistry& reg, const std::string& prefix);
};

// (n, c, h, w) -> (n*(h/p)*(w/p)) x (c*p*p) raw patch tokens, frame-major,
// patches row-major, values channel-major.
void patchify_raw(const Tensor4& t, int p, Mat& out);
void unpatchify_raw(const Mat& tokens, int p, int n, int c, int h, int w, Tensor4& out);

struct AdamW {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
    int t = 0;
    std::vector<Mat> m, v;

    // Updates params in registry order and snaps them to the float32 grid.
    void step(ParamRegistry& params, double lr);
};

void matmul(const Mat& a, const Mat& b, Mat& c, bool trans_a = false, bool trans_b = false,
            bool accumulate = false);

}  // namespace efvi::nn
