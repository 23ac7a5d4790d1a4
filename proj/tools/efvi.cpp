// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset generation, training, sampling, the
// flip probe, boundary curves, artifact re-evaluation and the full
// experiment pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "efvi/harness.hpp"

namespace fs = std::filesystem;
using namespace efvi;

namespace {

int run_gen_data(const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seed, bool seed_given) {
    DatasetConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open config: " + config_path);
        nlohmann::json j;
        in >> j;
        ExperimentConfig tmp = default_experiment_config();
        if (j.contains("dataset")) {  // accept a full experiment config too
            tmp = parse_experiment_config(j);
            cfg = tmp.dataset;
        } else {
            nlohmann::json wrapped = {{"dataset", j}};
            cfg = parse_experiment_config(wrapped).dataset;
        }
    }
    if (seed_given) cfg.seed = seed;
    const DatasetManifest manifest = make_dataset(cfg, out_dir);
    std::printf("wrote %zu clips (%zu train, %zu heldout) to %s\n", manifest.clips.size(),
                manifest.split("train").size(), manifest.split("heldout").size(), out_dir.c_str());
    return 0;
}

int run_train(const std::string& config_path, const std::string& regime_name,
              const std::string& data_dir, const std::string& out_stem) {
    ExperimentConfig cfg =
        config_path.empty() ? default_experiment_config() : load_experiment_config(config_path);
    const DatasetManifest manifest =
        load_manifest((fs::path(data_dir) / "manifest.json").string());
    std::vector<Video> clips;
    for (const auto* e : manifest.split("train")) clips.push_back(load_clip_checked(data_dir, *e));

    Rng master(cfg.master_seed);
    const bool efvi = regime_name == "efvi";
    if (!efvi && regime_name != "ft") throw ValidationError("train: regime must be ft or efvi");

    DenoiserModel model = init_model(cfg.backbone, efvi ? std::optional(cfg.efnet) : std::nullopt,
                                     master.stream("init").seed());
    TrainConfig tc = efvi ? cfg.train_efvi : cfg.train_ft;
    tc.seed = master.stream("train").seed();
    tc.threads = cfg.threads;
    const NoiseSchedule schedule = make_schedule(cfg.schedule_timesteps, cfg.schedule_kind);

    const TrainResult result = train(model, clips, tc, schedule);
    save_checkpoint(model, out_stem);

    std::ofstream trace(out_stem + "_loss.csv");
    trace << "iteration,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, result.loss_trace[i]);
        trace << buf;
    }
    if (!result.loss_trace.empty())
        std::printf("trained %s for %d iterations, final loss %.6f\n", regime_name.c_str(),
                    tc.iterations, result.loss_trace.back());
    std::printf("checkpoint: %s.json / %s.bin\n", out_stem.c_str(), out_stem.c_str());
    return 0;
}

int run_sample(const std::string& regime_name, const std::string& ckpt,
               const std::string& clip_path, const std::string& out_path, std::uint64_t seed,
               int steps, double eta, int timesteps, const std::string& fuse_kind,
               double fuse_lambda, double scale_w, bool scale_given) {
    DenoiserModel model = load_checkpoint(ckpt);
    const Video gt = load_clip(clip_path);
    const Tensor4 c_s = gt.data.slice_frame(0);
    const Tensor4 c_e = gt.data.slice_frame(gt.frames() - 1);

    SamplerConfig sc;
    sc.regime = sample_regime_from_string(regime_name);
    sc.steps = steps;
    sc.eta = eta;
    sc.seed = seed;
    sc.fuse_kind = fuse_kind_from_string(fuse_kind);
    sc.fuse_lambda = fuse_lambda;
    if (scale_given) sc.scale_w = scale_w;

    const NoiseSchedule schedule = make_schedule(timesteps);
    const Video out = sc.regime == SampleRegime::BD
                          ? sample_bidirectional(model, c_s, c_e, sc, schedule)
                          : sample(model, c_s, c_e, sc, schedule);
    save_clip(out, out_path);
    std::printf("sampled %s -> %s\n", regime_name.c_str(), out_path.c_str());
    return 0;
}

int run_probe_flip(const std::string& clip_path, const std::string& mode_name,
                   const std::string& report_path) {
    const Video video = load_clip(clip_path);
    const ProbeReport report = flip_probe(video, latent_mode_from_string(mode_name));
    nlohmann::json j = {{"commutator_norm", report.commutator_norm},
                        {"roundtrip_mse", report.roundtrip_mse},
                        {"flipdecode_mse", report.flipdecode_mse},
                        {"mode", to_string(report.mode)}};
    std::ofstream out(report_path);
    if (!out) throw std::runtime_error("cannot write " + report_path);
    out << j.dump(2) << '\n';
    std::printf("%s\n", j.dump().c_str());
    return 0;
}

int run_curves(const std::string& video_path, const std::string& ref_start,
               const std::string& ref_end, const std::string& out_path,
               const std::string& kind_name) {
    Video video = load_clip(video_path);
    if (!ref_start.empty()) {
        const Video ref = load_clip(ref_start);
        const Tensor4 frame = ref.data.slice_frame(0);
        if (frame.c != video.channels() || frame.h != video.height() || frame.w != video.width())
            throw ValidationError("curves: --ref-start geometry mismatch");
        std::copy(frame.v.begin(), frame.v.end(), video.data.frame(0));
    }
    if (!ref_end.empty()) {
        const Video ref = load_clip(ref_end);
        const Tensor4 frame = ref.data.slice_frame(ref.frames() - 1);
        if (frame.c != video.channels() || frame.h != video.height() || frame.w != video.width())
            throw ValidationError("curves: --ref-end geometry mismatch");
        std::copy(frame.v.begin(), frame.v.end(), video.data.frame(video.frames() - 1));
    }
    const BoundaryCurves curves = boundary_curves(video, distance_kind_from_string(kind_name));
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << "frame_index,d_start,d_end\n";
    char buf[96];
    for (std::size_t i = 0; i < curves.d_start.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i + 2, curves.d_start[i],
                      curves.d_end[i]);
        out << buf;
    }
    std::printf("wrote %zu curve rows to %s\n", curves.d_start.size(), out_path.c_str());
    return 0;
}

int run_eval(const std::string& run_dir, const std::string& out_path,
             const std::string& metric_name) {
    const nlohmann::json regimes =
        recompute_report(run_dir, distance_kind_from_string(metric_name));
    nlohmann::json j = {{"recomputed_from", "samples"}, {"regimes", regimes}};
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << j.dump(2) << '\n';
    for (auto it = regimes.begin(); it != regimes.end(); ++it)
        std::printf("%-12s mean total_deviation %.6f\n", it.key().c_str(),
                    it.value().at("mean").at("total_deviation").get<double>());
    return 0;
}

int run_run_experiment(const std::string& config_path, const std::string& out_dir) {
    const ExperimentConfig cfg =
        config_path.empty() ? [] {
            ExperimentConfig c = default_experiment_config();
            c.threads = static_cast<int>(std::thread::hardware_concurrency());
            return parse_experiment_config(c.to_json());
        }()
                            : load_experiment_config(config_path);
    const ComparisonReport report = run_experiment(cfg, out_dir);
    std::printf("%-12s %-18s %-14s %-14s\n", "regime", "total_deviation", "dev_start", "dev_end");
    for (const auto& r : report.regimes)
        std::printf("%-12s %-18.6f %-14.6f %-14.6f\n", r.name.c_str(), r.mean.total_deviation,
                    r.mean.deviation_start, r.mean.deviation_end);
    std::printf("report: %s/report.json\n", out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale video inbetweening laboratory"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic moving-shape dataset");
    std::string gen_config, gen_out = "data";
    std::uint64_t gen_seed = 0;
    gen->add_option("--config", gen_config, "dataset or experiment config JSON");
    gen->add_option("--out", gen_out, "output directory")->required();
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "seed override");

    // train
    auto* tr = app.add_subcommand("train", "train a model on a generated dataset");
    std::string tr_config, tr_regime = "ft", tr_data, tr_out = "model";
    tr->add_option("--config", tr_config, "experiment config JSON");
    tr->add_option("--regime", tr_regime, "ft|efvi")->required();
    tr->add_option("--data", tr_data, "dataset directory (with manifest.json)")->required();
    tr->add_option("--out", tr_out, "checkpoint stem");

    // sample
    auto* sa = app.add_subcommand("sample", "sample a video from boundary frames");
    std::string sa_regime = "ft", sa_ckpt, sa_clip, sa_out = "sample.clip";
    std::string sa_fuse = "linear_ramp";
    std::uint64_t sa_seed = 0;
    int sa_steps = 30, sa_timesteps = 1000;
    double sa_eta = 0.0, sa_lambda = 0.5, sa_scale = 1.0;
    sa->add_option("--regime", sa_regime, "i2v|ft|bd|efvi")->required();
    sa->add_option("--ckpt", sa_ckpt, "checkpoint stem")->required();
    sa->add_option("--clip", sa_clip, "clip providing the boundary frames")->required();
    sa->add_option("--out", sa_out, "output clip path");
    sa->add_option("--seed", sa_seed, "sampling seed");
    sa->add_option("--steps", sa_steps, "inference steps");
    sa->add_option("--timesteps", sa_timesteps, "schedule length T");
    sa->add_option("--eta", sa_eta, "stochasticity in [0,1]");
    sa->add_option("--fuse-kind", sa_fuse, "uniform|linear_ramp (BD)");
    sa->add_option("--fuse-lambda", sa_lambda, "uniform fusion weight (BD)");
    auto* sa_scale_opt = sa->add_option("--scale-w", sa_scale, "EF-Net feature scale (EFVI)");

    // probe-flip
    auto* pf = app.add_subcommand("probe-flip", "temporal-reversal probe of a codec");
    std::string pf_clip, pf_mode = "causal", pf_report = "probe.json";
    pf->add_option("--clip", pf_clip, "input clip")->required();
    pf->add_option("--mode", pf_mode, "causal|spatial_only");
    pf->add_option("--report", pf_report, "output JSON path");

    // curves
    auto* cu = app.add_subcommand("curves", "boundary-distance curves of a clip");
    std::string cu_video, cu_ref_start, cu_ref_end, cu_out = "curves.csv", cu_kind = "mse";
    cu->add_option("--video", cu_video, "input clip")->required();
    cu->add_option("--ref-start", cu_ref_start, "clip supplying the start reference frame");
    cu->add_option("--ref-end", cu_ref_end, "clip supplying the end reference frame");
    cu->add_option("--out", cu_out, "output CSV path");
    cu->add_option("--kind", cu_kind, "mse|mae");

    // eval
    auto* ev = app.add_subcommand("eval", "recompute a report from persisted artifacts");
    std::string ev_run, ev_out = "recomputed.json", ev_metric = "mse";
    ev->add_option("--run", ev_run, "experiment output directory")->required();
    ev->add_option("--out", ev_out, "output JSON path");
    ev->add_option("--metric", ev_metric, "mse|mae");

    // run-experiment
    auto* rx = app.add_subcommand("run-experiment", "full train/sample/compare pipeline");
    std::string rx_config, rx_out = "experiment";
    rx->add_option("--config", rx_config, "experiment config JSON");
    rx->add_option("--out", rx_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return run_gen_data(gen_config, gen_out, gen_seed, gen_seed_opt->count() > 0);
        if (tr->parsed()) return run_train(tr_config, tr_regime, tr_data, tr_out);
        if (sa->parsed())
            return run_sample(sa_regime, sa_ckpt, sa_clip, sa_out, sa_seed, sa_steps, sa_eta,
                              sa_timesteps, sa_fuse, sa_lambda, sa_scale,
                              sa_scale_opt->count() > 0);
        if (pf->parsed()) return run_probe_flip(pf_clip, pf_mode, pf_report);
        if (cu->parsed()) return run_curves(cu_video, cu_ref_start, cu_ref_end, cu_out, cu_kind);
        if (ev->parsed()) return run_eval(ev_run, ev_out, ev_metric);
        if (rx->parsed()) return run_run_experiment(rx_config, rx_out);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
