// SPDX-License-Identifier: Apache-2.0
#include "efvi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "efvi/common.hpp"

namespace fs = std::filesystem;

namespace efvi {

namespace {

// Strict JSON object reader: every key must be consumed.
class ObjectReader {
public:
    ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError("config: " + path_ + " must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (j_.contains(key)) {
            try {
                out = j_.at(key).get<T>();
            } catch (const nlohmann::json::exception&) {
                throw ValidationError("config: bad value type for " + path_ + "." + key);
            }
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    const nlohmann::json* sub(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ValidationError("config: unknown field " + path_ + "." + it.key());
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void parse_dataset(const nlohmann::json& j, DatasetConfig& c) {
    ObjectReader r(j, "dataset");
    r.get("count", c.count);
    r.get("train_fraction", c.train_fraction);
    r.get("frames", c.frames);
    r.get("height", c.height);
    r.get("width", c.width);
    r.get("size_min", c.size_min);
    r.get("size_max", c.size_max);
    r.get("position_margin", c.position_margin);
    r.get("background_min", c.background_min);
    r.get("background_max", c.background_max);
    r.get("color_min", c.color_min);
    r.get("color_max", c.color_max);
    r.finish();
}

void parse_backbone(const nlohmann::json& j, BackboneConfig& c) {
    ObjectReader r(j, "backbone");
    r.get("blocks", c.blocks);
    r.get("dim", c.dim);
    r.get("heads", c.heads);
    r.get("patch", c.patch);
    r.finish();
}

void parse_efnet(const nlohmann::json& j, EFNetConfig& c) {
    ObjectReader r(j, "efnet");
    r.get("blocks", c.blocks);
    r.get("ablate_zt", c.ablate_zt);
    r.get("use_temporal_embedding", c.use_temporal_embedding);
    r.get("scale_w", c.scale_w);
    r.finish();
}

void parse_train(const nlohmann::json& j, TrainConfig& c) {
    ObjectReader r(j, "train");
    r.get("batch_size", c.batch_size);
    r.get("iterations", c.iterations);
    r.get("lr", c.lr);
    r.get("lr_min", c.lr_min);
    r.get("beta1", c.beta1);
    r.get("beta2", c.beta2);
    r.get("adam_eps", c.adam_eps);
    r.get("weight_decay", c.weight_decay);
    r.get("cond_dropout", c.cond_dropout);
    r.get("checkpoint_every", c.checkpoint_every);
    r.finish();
}

void parse_eval(const nlohmann::json& j, EvalConfig& c) {
    ObjectReader r(j, "eval");
    r.get("sample_seeds", c.sample_seeds);
    r.get("regimes", c.regimes);
    r.get("efnet_scales", c.efnet_scales);
    std::string metric = to_string(c.metric);
    r.get("metric", metric);
    c.metric = distance_kind_from_string(metric);
    r.get("steps", c.steps);
    r.get("eta", c.eta);
    std::string fuse = c.fuse_kind == FuseKind::uniform ? "uniform" : "linear_ramp";
    r.get("fuse_kind", fuse);
    c.fuse_kind = fuse_kind_from_string(fuse);
    r.get("fuse_lambda", c.fuse_lambda);
    r.finish();
}

std::string scale_row_name(double scale) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "efvi_w%g", scale);
    return buf;
}

}  // namespace

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["master_seed"] = master_seed;
    j["threads"] = threads;
    j["dataset"] = {{"count", dataset.count},
                    {"train_fraction", dataset.train_fraction},
                    {"frames", dataset.frames},
                    {"height", dataset.height},
                    {"width", dataset.width},
                    {"size_min", dataset.size_min},
                    {"size_max", dataset.size_max},
                    {"position_margin", dataset.position_margin},
                    {"background_min", dataset.background_min},
                    {"background_max", dataset.background_max},
                    {"color_min", dataset.color_min},
                    {"color_max", dataset.color_max}};
    j["backbone"] = {{"blocks", backbone.blocks},
                     {"dim", backbone.dim},
                     {"heads", backbone.heads},
                     {"patch", backbone.patch}};
    j["efnet"] = {{"blocks", efnet.blocks},
                  {"ablate_zt", efnet.ablate_zt},
                  {"use_temporal_embedding", efnet.use_temporal_embedding},
                  {"scale_w", efnet.scale_w}};
    j["schedule"] = {{"timesteps", schedule_timesteps}, {"kind", schedule_kind}};
    j["train"] = {{"batch_size", train_ft.batch_size},
                  {"iterations", train_ft.iterations},
                  {"lr", train_ft.lr},
                  {"lr_min", train_ft.lr_min},
                  {"beta1", train_ft.beta1},
                  {"beta2", train_ft.beta2},
                  {"adam_eps", train_ft.adam_eps},
                  {"weight_decay", train_ft.weight_decay},
                  {"cond_dropout", train_ft.cond_dropout},
                  {"checkpoint_every", train_ft.checkpoint_every}};
    j["eval"] = {{"sample_seeds", eval.sample_seeds},
                 {"regimes", eval.regimes},
                 {"efnet_scales", eval.efnet_scales},
                 {"metric", to_string(eval.metric)},
                 {"steps", eval.steps},
                 {"eta", eval.eta},
                 {"fuse_kind", eval.fuse_kind == FuseKind::uniform ? "uniform" : "linear_ramp"},
                 {"fuse_lambda", eval.fuse_lambda}};
    return j;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    ExperimentConfig c = default_experiment_config();
    ObjectReader r(j, "<root>");
    r.get("master_seed", c.master_seed);
    r.get("threads", c.threads);
    if (const auto* s = r.sub("dataset")) parse_dataset(*s, c.dataset);
    if (const auto* s = r.sub("backbone")) parse_backbone(*s, c.backbone);
    if (const auto* s = r.sub("efnet")) parse_efnet(*s, c.efnet);
    if (const auto* s = r.sub("schedule")) {
        ObjectReader sr(*s, "schedule");
        sr.get("timesteps", c.schedule_timesteps);
        sr.get("kind", c.schedule_kind);
        sr.finish();
    }
    if (const auto* s = r.sub("train")) parse_train(*s, c.train_ft);
    if (const auto* s = r.sub("eval")) parse_eval(*s, c.eval);
    r.finish();

    if (c.threads <= 0)
        c.threads = std::max(1u, std::thread::hardware_concurrency());

    // Latent geometry follows the dataset; temporal compression factor 2.
    c.backbone.latent_frames = 1 + (c.dataset.frames - 1) / 2;
    c.backbone.latent_channels = 6;
    c.backbone.height = c.dataset.height;
    c.backbone.width = c.dataset.width;
    c.backbone.validate();
    if (c.efnet.blocks > c.backbone.blocks)
        throw ValidationError("config: efnet.blocks (M) must not exceed backbone.blocks (N)");

    c.train_ft.regime = TrainRegime::FT;
    c.train_efvi = c.train_ft;
    c.train_efvi.regime = TrainRegime::EFVI;
    for (const auto& name : c.eval.regimes) sample_regime_from_string(name);  // validate
    if (c.eval.sample_seeds < 1) throw ValidationError("config: eval.sample_seeds must be >= 1");
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config " + path + ": parse error: " + e.what());
    }
    return parse_experiment_config(j);
}

ExperimentConfig default_experiment_config() {
    ExperimentConfig c;
    c.backbone.latent_frames = 1 + (c.dataset.frames - 1) / 2;
    c.backbone.height = c.dataset.height;
    c.backbone.width = c.dataset.width;
    return c;
}

const RegimeResult* ComparisonReport::find(const std::string& name) const {
    for (const auto& r : regimes)
        if (r.name == name) return &r;
    return nullptr;
}

namespace {

struct SampleTask {
    std::string regime_name;
    SampleRegime regime = SampleRegime::FT;
    std::optional<double> scale_w;
    int heldout_index = 0;  // position within the heldout list
    const ManifestEntry* entry = nullptr;
    int seed_index = 0;
    std::uint64_t seed = 0;
};

void write_curve_csv(const BoundaryCurves& curves, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "frame_index,d_start,d_end\n";
    char buf[96];
    for (std::size_t i = 0; i < curves.d_start.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i + 2, curves.d_start[i],
                      curves.d_end[i]);
        out << buf;
    }
}

CurveSummary mean_summary(const std::vector<ClipRow>& rows) {
    CurveSummary m;
    if (rows.empty()) return m;
    for (const auto& r : rows) {
        m.deviation_start += r.summary.deviation_start;
        m.deviation_end += r.summary.deviation_end;
        m.asymmetry += r.summary.asymmetry;
        m.total_deviation += r.summary.total_deviation;
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    m.deviation_start *= inv;
    m.deviation_end *= inv;
    m.asymmetry *= inv;
    m.total_deviation *= inv;
    return m;
}

BoundaryCurves mean_curves(const std::vector<const BoundaryCurves*>& curves) {
    BoundaryCurves m;
    if (curves.empty()) return m;
    m.kind = curves[0]->kind;
    m.d_start.assign(curves[0]->d_start.size(), 0.0);
    m.d_end.assign(curves[0]->d_end.size(), 0.0);
    for (const auto* c : curves)
        for (std::size_t i = 0; i < m.d_start.size(); ++i) {
            m.d_start[i] += c->d_start[i];
            m.d_end[i] += c->d_end[i];
        }
    const double inv = 1.0 / static_cast<double>(curves.size());
    for (auto& x : m.d_start) x *= inv;
    for (auto& x : m.d_end) x *= inv;
    return m;
}

std::string clip_stem(const std::string& rel_path) {
    return fs::path(rel_path).stem().string();
}

nlohmann::json summary_json(const CurveSummary& s) {
    return {{"deviation_start", s.deviation_start},
            {"deviation_end", s.deviation_end},
            {"asymmetry", s.asymmetry},
            {"total_deviation", s.total_deviation}};
}

}  // namespace

nlohmann::json report_regimes_json(const ComparisonReport& report) {
    nlohmann::json regimes = nlohmann::json::object();
    for (const auto& reg : report.regimes) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : reg.rows) {
            nlohmann::json r = summary_json(row.summary);
            r["clip"] = row.clip_path;
            r["checksum"] = row.checksum;
            r["sample_seed"] = row.sample_seed;
            rows.push_back(std::move(r));
        }
        regimes[reg.name] = {{"mean", summary_json(reg.mean)}, {"rows", std::move(rows)}};
    }
    return regimes;
}

void write_report(const ComparisonReport& report, const std::string& out_dir) {
    nlohmann::json j;
    j["master_seed"] = report.master_seed;
    j["config"] = report.config_echo;
    j["dataset_manifest"] = "dataset/manifest.json";
    j["regimes"] = report_regimes_json(report);
    std::ofstream out(fs::path(out_dir) / "report.json");
    if (!out) throw std::runtime_error("cannot write report.json");
    out << j.dump(2) << '\n';

    nlohmann::json t;
    for (const auto& [k, v] : report.timings_seconds) t[k] = v;
    std::ofstream ts(fs::path(out_dir) / "timings.json");
    ts << t.dump(2) << '\n';
}

void emit_plot_data(const ComparisonReport& report, const BoundaryCurves& gt_mean,
                    const std::string& out_dir) {
    const fs::path plots = fs::path(out_dir) / "plots";
    fs::create_directories(plots);
    nlohmann::json index;
    index["gt"] = nlohmann::json::object();
    index["regimes"] = nlohmann::json::object();
    char buf[160];
    for (const auto& reg : report.regimes) {
        std::vector<const BoundaryCurves*> curves;
        curves.reserve(reg.rows.size());
        for (const auto& row : reg.rows) curves.push_back(&row.curves);
        const BoundaryCurves m = mean_curves(curves);
        const std::string file = reg.name + ".csv";
        std::ofstream out(plots / file);
        if (!out) throw std::runtime_error("cannot write plot csv");
        out << "frame_index,d_start,d_end,gt_d_start,gt_d_end\n";
        for (std::size_t i = 0; i < m.d_start.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", i + 2, m.d_start[i],
                          m.d_end[i], gt_mean.d_start[i], gt_mean.d_end[i]);
            out << buf;
        }
        index["regimes"][reg.name] = "plots/" + file;
    }
    write_curve_csv(gt_mean, (plots / "gt.csv").string());
    index["gt"] = "plots/gt.csv";
    std::ofstream out(plots / "index.json");
    out << index.dump(2) << '\n';
}

ComparisonReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::error_code ec;
    fs::remove(fs::path(out_dir) / "FAILED", ec);

    std::string stage = "setup";
    const auto fail_marker = [&](const std::string& why) {
        std::ofstream f(fs::path(out_dir) / "FAILED");
        f << "stage: " << stage << "\n" << why << "\n";
    };

    try {
        ComparisonReport report;
        report.master_seed = cfg.master_seed;
        report.config_echo = cfg.to_json();
        Rng master(cfg.master_seed);
        const NoiseSchedule schedule = make_schedule(cfg.schedule_timesteps, cfg.schedule_kind);
        using Clock = std::chrono::steady_clock;
        const auto timed = [&](const char* name, auto&& fn) {
            const auto t0 = Clock::now();
            fn();
            report.timings_seconds[name] = std::chrono::duration<double>(Clock::now() - t0).count();
        };

        // ------------------------------------------------------- dataset
        stage = "dataset";
        DatasetConfig dcfg = cfg.dataset;
        dcfg.seed = master.stream("dataset").seed();
        const std::string data_dir = (fs::path(out_dir) / "dataset").string();
        DatasetManifest manifest;
        timed("dataset", [&] { manifest = make_dataset(dcfg, data_dir); });

        std::vector<Video> train_clips;
        for (const auto* e : manifest.split("train"))
            train_clips.push_back(load_clip_checked(data_dir, *e));
        const auto heldout = manifest.split("heldout");
        std::vector<Video> heldout_clips;
        for (const auto* e : heldout) heldout_clips.push_back(load_clip_checked(data_dir, *e));

        // -------------------------------------------------------- train
        const std::uint64_t init_seed = master.stream("init").seed();
        const std::uint64_t train_seed = master.stream("train").seed();
        fs::create_directories(fs::path(out_dir) / "checkpoints");
        fs::create_directories(fs::path(out_dir) / "losses");

        const auto write_trace = [&](const TrainResult& r, const std::string& name) {
            std::ofstream out(fs::path(out_dir) / "losses" / (name + ".csv"));
            out << "iteration,loss\n";
            char buf[64];
            for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, r.loss_trace[i]);
                out << buf;
            }
        };

        stage = "train-ft";
        DenoiserModel ft_model = init_model(cfg.backbone, std::nullopt, init_seed);
        {
            TrainConfig tc = cfg.train_ft;
            tc.seed = train_seed;
            tc.threads = cfg.threads;
            CheckpointHook hook = [&](int iter, DenoiserModel& m) {
                save_checkpoint(m, (fs::path(out_dir) / "checkpoints" /
                                    ("ft_iter" + std::to_string(iter))).string());
            };
            TrainResult r;
            timed("train_ft", [&] { r = train(ft_model, train_clips, tc, schedule, hook); });
            write_trace(r, "ft");
            save_checkpoint(ft_model, (fs::path(out_dir) / "checkpoints" / "ft").string());
        }

        stage = "train-efvi";
        DenoiserModel efvi_model = init_model(cfg.backbone, cfg.efnet, init_seed);
        {
            TrainConfig tc = cfg.train_efvi;
            tc.seed = train_seed;
            tc.threads = cfg.threads;
            CheckpointHook hook = [&](int iter, DenoiserModel& m) {
                save_checkpoint(m, (fs::path(out_dir) / "checkpoints" /
                                    ("efvi_iter" + std::to_string(iter))).string());
            };
            TrainResult r;
            timed("train_efvi", [&] { r = train(efvi_model, train_clips, tc, schedule, hook); });
            write_trace(r, "efvi");
            save_checkpoint(efvi_model, (fs::path(out_dir) / "checkpoints" / "efvi").string());
        }

        // ------------------------------------------------------- sample
        stage = "sample";
        std::vector<std::string> regime_names = cfg.eval.regimes;
        for (double s : cfg.eval.efnet_scales) regime_names.push_back(scale_row_name(s));

        std::vector<SampleTask> tasks;
        for (const auto& name : regime_names) {
            SampleTask proto;
            proto.regime_name = name;
            if (name.rfind("efvi_w", 0) == 0) {
                proto.regime = SampleRegime::EFVI;
                proto.scale_w = std::stod(name.substr(6));
            } else {
                proto.regime = sample_regime_from_string(name);
            }
            for (std::size_t h = 0; h < heldout.size(); ++h) {
                for (int s = 0; s < cfg.eval.sample_seeds; ++s) {
                    SampleTask t = proto;
                    t.heldout_index = static_cast<int>(h);
                    t.entry = heldout[h];
                    t.seed_index = s;
                    // Keyed by clip and seed index only, shared across
                    // regimes: fresh FT and EF-VI models must see identical
                    // noise (zero-init neutrality).
                    t.seed = master.stream("sample." + clip_stem(t.entry->path), s).seed();
                    tasks.push_back(std::move(t));
                }
            }
        }

        for (const auto& name : regime_names)
            fs::create_directories(fs::path(out_dir) / "samples" / name);
        fs::create_directories(fs::path(out_dir) / "curves" / "gt");

        std::vector<BoundaryCurves> gt_curves(heldout.size());
        for (std::size_t h = 0; h < heldout.size(); ++h) {
            gt_curves[h] = boundary_curves(heldout_clips[h], cfg.eval.metric);
            write_curve_csv(gt_curves[h], (fs::path(out_dir) / "curves" / "gt" /
                                           (clip_stem(heldout[h]->path) + ".csv")).string());
        }

        std::vector<ClipRow> results(tasks.size());
        timed("sample", [&] {
            for (const auto& name : regime_names)
                fs::create_directories(fs::path(out_dir) / "curves" / name);

            const auto run_one = [&](const SampleTask& t, ClipRow& out_row) {
                const Video& gt = heldout_clips[t.heldout_index];
                const Tensor4 c_s = gt.data.slice_frame(0);
                const Tensor4 c_e = gt.data.slice_frame(gt.frames() - 1);
                SamplerConfig sc;
                sc.steps = cfg.eval.steps;
                sc.eta = cfg.eval.eta;
                sc.fuse_kind = cfg.eval.fuse_kind;
                sc.fuse_lambda = cfg.eval.fuse_lambda;
                sc.regime = t.regime;
                sc.seed = t.seed;
                sc.scale_w = t.scale_w;
                const DenoiserModel& model = t.regime == SampleRegime::EFVI ? efvi_model : ft_model;
                const Video out = t.regime == SampleRegime::BD
                                      ? sample_bidirectional(model, c_s, c_e, sc, schedule)
                                      : sample(model, c_s, c_e, sc, schedule);
                out_row.clip_path = t.entry->path;
                out_row.checksum = t.entry->checksum;
                out_row.sample_seed = t.seed;
                out_row.curves = boundary_curves(out, cfg.eval.metric);
                out_row.summary = curve_summary(out_row.curves, gt_curves[t.heldout_index]);
                const std::string stem =
                    clip_stem(t.entry->path) + "_s" + std::to_string(t.seed_index);
                save_clip(out, (fs::path(out_dir) / "samples" / t.regime_name /
                                (stem + ".clip")).string());
                write_curve_csv(out_row.curves, (fs::path(out_dir) / "curves" / t.regime_name /
                                                 (stem + ".csv")).string());
            };

            std::atomic<std::size_t> next{0};
            std::exception_ptr worker_error;
            std::mutex error_mutex;
            const auto worker = [&] {
                try {
                    for (;;) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= tasks.size()) return;
                        run_one(tasks[i], results[i]);
                    }
                } catch (...) {
                    const std::scoped_lock lock(error_mutex);
                    if (!worker_error) worker_error = std::current_exception();
                }
            };
            const int workers = std::max(1, cfg.threads);
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
            if (worker_error) std::rethrow_exception(worker_error);
        });

        // ------------------------------------------------------- report
        stage = "report";
        std::size_t cursor = 0;
        for (const auto& name : regime_names) {
            RegimeResult reg;
            reg.name = name;
            const std::size_t count = heldout.size() * cfg.eval.sample_seeds;
            for (std::size_t k = 0; k < count; ++k) reg.rows.push_back(results[cursor + k]);
            cursor += count;
            reg.mean = mean_summary(reg.rows);
            report.regimes.push_back(std::move(reg));
        }

        std::vector<const BoundaryCurves*> gt_ptrs;
        for (const auto& c : gt_curves) gt_ptrs.push_back(&c);
        const BoundaryCurves gt_mean = mean_curves(gt_ptrs);
        emit_plot_data(report, gt_mean, out_dir);
        write_report(report, out_dir);
        return report;
    } catch (const std::exception& e) {
        fail_marker(e.what());
        throw std::runtime_error("experiment failed at stage '" + stage + "': " + e.what());
    }
}

nlohmann::json recompute_report(const std::string& run_dir, DistanceKind metric) {
    const DatasetManifest manifest =
        load_manifest((fs::path(run_dir) / "dataset" / "manifest.json").string());
    const std::string data_dir = (fs::path(run_dir) / "dataset").string();
    const auto heldout = manifest.split("heldout");

    std::map<std::string, const ManifestEntry*> by_stem;
    std::map<std::string, BoundaryCurves> gt_by_stem;
    for (const auto* e : heldout) {
        by_stem[clip_stem(e->path)] = e;
        gt_by_stem[clip_stem(e->path)] = boundary_curves(load_clip_checked(data_dir, *e), metric);
    }

    nlohmann::json regimes = nlohmann::json::object();
    const fs::path samples = fs::path(run_dir) / "samples";
    if (!fs::exists(samples)) throw std::runtime_error("no samples directory under " + run_dir);

    std::vector<std::string> regime_names;
    for (const auto& entry : fs::directory_iterator(samples))
        if (entry.is_directory()) regime_names.push_back(entry.path().filename().string());
    std::sort(regime_names.begin(), regime_names.end());

    for (const auto& name : regime_names) {
        std::vector<std::string> files;
        for (const auto& f : fs::directory_iterator(samples / name))
            if (f.path().extension() == ".clip") files.push_back(f.path().string());
        std::sort(files.begin(), files.end());
        std::vector<ClipRow> rows;
        for (const auto& file : files) {
            const std::string stem = fs::path(file).stem().string();
            const auto us = stem.rfind("_s");
            if (us == std::string::npos) continue;
            const std::string clip_name = stem.substr(0, us);
            auto it = by_stem.find(clip_name);
            if (it == by_stem.end())
                throw std::runtime_error("sample " + file + " has no matching heldout clip");
            ClipRow row;
            row.clip_path = it->second->path;
            row.checksum = it->second->checksum;
            row.curves = boundary_curves(load_clip(file), metric);
            row.summary = curve_summary(row.curves, gt_by_stem[clip_name]);
            rows.push_back(std::move(row));
        }
        nlohmann::json jrows = nlohmann::json::array();
        for (const auto& row : rows) {
            nlohmann::json r = summary_json(row.summary);
            r["clip"] = row.clip_path;
            r["checksum"] = row.checksum;
            jrows.push_back(std::move(r));
        }
        regimes[name] = {{"mean", summary_json(mean_summary(rows))}, {"rows", std::move(jrows)}};
    }
    return regimes;
}

}  // namespace efvi
