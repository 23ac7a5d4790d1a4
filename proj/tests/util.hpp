// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <thread>
#include <vector>

#include "efvi/diffusion.hpp"

namespace efvi::testutil {

struct GradCheckResult {
    double max_rel = 0.0;
    std::string worst_param;
    std::size_t checked = 0;
};

// Central finite differences at double precision against the analytic
// gradients of training_loss. Relative error uses a small floor so that
// parameters with (genuinely) zero gradient compare at absolute precision.
inline GradCheckResult finite_difference_check(const DenoiserModel& model, const Latent& z,
                                               const Tensor4& c_s, const Tensor4& c_e, int t,
                                               const Latent& eps, TrainRegime regime,
                                               const NoiseSchedule& schedule, double step,
                                               int threads) {
    DenoiserModel base = model;
    nn::ParamRegistry reg = base.params();
    nn::zero_grads(reg);
    LossWorkspace ws;
    training_loss_encoded(base, z, c_s, c_e, t, eps, regime, schedule, false, false, ws, true);

    std::vector<std::vector<double>> analytic(reg.size());
    for (std::size_t i = 0; i < reg.size(); ++i) analytic[i] = reg[i].grad->v;

    struct Shard {
        GradCheckResult result;
    };
    std::vector<Shard> shards(threads);

    auto run = [&](int w) {
        DenoiserModel local = model;
        nn::ParamRegistry lreg = local.params();
        LossWorkspace lws;
        GradCheckResult& r = shards[w].result;
        for (std::size_t p = w; p < lreg.size(); p += threads) {
            Mat& value = *lreg[p].value;
            for (std::size_t i = 0; i < value.v.size(); ++i) {
                const double saved = value.v[i];
                value.v[i] = saved + step;
                const double lp = training_loss_encoded(local, z, c_s, c_e, t, eps, regime,
                                                        schedule, false, false, lws, false);
                value.v[i] = saved - step;
                const double lm = training_loss_encoded(local, z, c_s, c_e, t, eps, regime,
                                                        schedule, false, false, lws, false);
                value.v[i] = saved;
                const double fd = (lp - lm) / (2.0 * step);
                const double g = analytic[p][i];
                const double denom = std::max({std::abs(g), std::abs(fd), 1e-6});
                const double rel = std::abs(g - fd) / denom;
                ++r.checked;
                if (rel > r.max_rel) {
                    r.max_rel = rel;
                    r.worst_param = lreg[p].name + "[" + std::to_string(i) + "]";
                }
            }
        }
    };

    if (threads <= 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) pool.emplace_back(run, w);
        for (auto& th : pool) th.join();
    }

    GradCheckResult total;
    for (const auto& s : shards) {
        total.checked += s.result.checked;
        if (s.result.max_rel > total.max_rel) {
            total.max_rel = s.result.max_rel;
            total.worst_param = s.result.worst_param;
        }
    }
    return total;
}

// Perturbs every parameter so zero-initialized layers take part in the
// check (a layer stuck at zero would hide its upstream gradients).
inline void activate_parameters(DenoiserModel& model, std::uint64_t seed, double scale = 0.02) {
    Rng rng(seed);
    for (auto& p : model.params())
        for (auto& x : p.value->v) x += scale * rng.gaussian();
}

inline Video random_video(int frames, int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Video v;
    v.data = Tensor4(frames, 3, h, w);
    for (auto& x : v.data.v) x = static_cast<double>(rng.uniform_int(0, 1 << 16)) / (1 << 16);
    return v;
}

}  // namespace efvi::testutil
