// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "efvi/checkpoint.hpp"
#include "efvi/dataset.hpp"
#include "efvi/diffusion.hpp"
#include "efvi/metrics.hpp"

namespace efvi {

struct EvalConfig {
    int sample_seeds = 3;
    std::vector<std::string> regimes = {"i2v", "ft", "bd", "efvi"};
    std::vector<double> efnet_scales = {0.5, 2.0};  // extra EFVI rows, named efvi_w<scale>
    DistanceKind metric = DistanceKind::mse;
    int steps = 30;
    double eta = 0.0;
    FuseKind fuse_kind = FuseKind::linear_ramp;
    double fuse_lambda = 0.5;
};

struct ExperimentConfig {
    std::uint64_t master_seed = 1;
    int threads = 0;  // resolved to a concrete count at parse time
    DatasetConfig dataset;
    BackboneConfig backbone;  // latent geometry is derived from dataset
    EFNetConfig efnet;
    int schedule_timesteps = 1000;
    std::string schedule_kind = "cosine";
    TrainConfig train_ft, train_efvi;  // same seed: shared data stream
    EvalConfig eval;

    nlohmann::json to_json() const;
};

// Strict parse: unknown fields are errors; every field has a default.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig default_experiment_config();

struct ClipRow {
    std::string clip_path;
    std::string checksum;
    std::uint64_t sample_seed = 0;
    CurveSummary summary;
    BoundaryCurves curves;  // persisted to per-clip CSV, not to report.json
};

struct RegimeResult {
    std::string name;
    CurveSummary mean;
    std::vector<ClipRow> rows;
};

struct ComparisonReport {
    std::uint64_t master_seed = 0;
    nlohmann::json config_echo;
    std::vector<RegimeResult> regimes;
    std::map<std::string, double> timings_seconds;  // sidecar; kept out of report.json

    const RegimeResult* find(const std::string& name) const;
};

// Full protocol: dataset, FT and EF-VI training (shared backbone seed and
// data stream), sampling of every configured regime over heldout pairs and
// seeds, boundary curves against ground truth, report and plot data.
// Deterministic at the byte level given (config, thread count); wall-clock
// timings go to a separate timings.json.
ComparisonReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

nlohmann::json report_regimes_json(const ComparisonReport& report);
void write_report(const ComparisonReport& report, const std::string& out_dir);

// One CSV per regime (mean curves per frame index plus the ground-truth
// curve) and a combined JSON index.
void emit_plot_data(const ComparisonReport& report, const BoundaryCurves& gt_mean,
                    const std::string& out_dir);

// Recomputes the per-regime results from the persisted artifacts (dataset
// manifest plus sample clips) of a previous run.
nlohmann::json recompute_report(const std::string& run_dir, DistanceKind metric);

}  // namespace efvi
