// SPDX-License-Identifier: Apache-2.0
#include "efvi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "efvi/common.hpp"

namespace fs = std::filesystem;

namespace efvi {

const char* to_string(ShapeKind k) {
    switch (k) {
        case ShapeKind::circle: return "circle";
        case ShapeKind::square: return "square";
        case ShapeKind::bar: return "bar";
    }
    return "?";
}

const char* to_string(Trajectory t) {
    switch (t) {
        case Trajectory::linear: return "linear";
        case Trajectory::arc: return "arc";
        case Trajectory::bounce: return "bounce";
    }
    return "?";
}

ShapeKind shape_kind_from_string(const std::string& s) {
    if (s == "circle") return ShapeKind::circle;
    if (s == "square") return ShapeKind::square;
    if (s == "bar") return ShapeKind::bar;
    throw ValidationError("unknown shape_kind: " + s);
}

Trajectory trajectory_from_string(const std::string& s) {
    if (s == "linear") return Trajectory::linear;
    if (s == "arc") return Trajectory::arc;
    if (s == "bounce") return Trajectory::bounce;
    throw ValidationError("unknown trajectory: " + s);
}

namespace {

struct WallBox {
    double x_lo, x_hi, y_lo, y_hi;
};

// Walls keep the whole shape inside the image; bounce reflects the center
// off them. Every shape fits in a size_px-diameter bounding box.
WallBox bounce_walls(const ClipSpec& spec) {
    const double rx = 0.5 * spec.size_px / spec.width;
    const double ry = 0.5 * spec.size_px / spec.height;
    return {rx, 1.0 - rx, ry, 1.0 - ry};
}

// Triangle-wave fold of v into [lo, hi].
double fold(double v, double lo, double hi) {
    const double span = hi - lo;
    double w = std::fmod(v - lo, 2.0 * span);
    if (w < 0.0) w += 2.0 * span;
    return lo + (w <= span ? w : 2.0 * span - w);
}

}  // namespace

void validate_spec(const ClipSpec& spec) {
    if (spec.frames < 3 || spec.frames % 2 == 0)
        throw ValidationError("clip spec: frames must be odd and >= 3, got " + std::to_string(spec.frames));
    if (spec.height <= 0 || spec.width <= 0) throw ValidationError("clip spec: height/width must be positive");
    if (spec.size_px <= 0) throw ValidationError("clip spec: size_px must be positive");
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(spec.start_x) || !in_unit(spec.start_y))
        throw ValidationError("clip spec: start_pos outside [0,1]^2");
    if (!in_unit(spec.end_x) || !in_unit(spec.end_y)) throw ValidationError("clip spec: end_pos outside [0,1]^2");
    for (double c : spec.color)
        if (!in_unit(c)) throw ValidationError("clip spec: color outside [0,1]");
    if (!in_unit(spec.background)) throw ValidationError("clip spec: background outside [0,1]");
    if (spec.trajectory == Trajectory::bounce) {
        const WallBox box = bounce_walls(spec);
        auto inside = [&](double x, double y) {
            return x >= box.x_lo && x <= box.x_hi && y >= box.y_lo && y <= box.y_hi;
        };
        if (!inside(spec.start_x, spec.start_y))
            throw ValidationError("clip spec: start_pos outside bounce walls for this shape size");
        if (!inside(spec.end_x, spec.end_y))
            throw ValidationError("clip spec: end_pos outside bounce walls for this shape size");
    }
}

void shape_center(const ClipSpec& spec, int frame_index, double& cx, double& cy) {
    const double u = spec.frames == 1 ? 0.0 : static_cast<double>(frame_index) / (spec.frames - 1);
    double px = spec.start_x + u * (spec.end_x - spec.start_x);
    double py = spec.start_y + u * (spec.end_y - spec.start_y);
    switch (spec.trajectory) {
        case Trajectory::linear:
            break;
        case Trajectory::arc: {
            const double dx = spec.end_x - spec.start_x;
            const double dy = spec.end_y - spec.start_y;
            const double len = std::sqrt(dx * dx + dy * dy);
            if (len > 0.0) {
                const double side = (spec.rng_seed & 1) ? 1.0 : -1.0;
                const double bulge = 0.3 * len * side * std::sin(3.14159265358979323846 * u);
                px += bulge * (-dy / len);
                py += bulge * (dx / len);
            }
            break;
        }
        case Trajectory::bounce: {
            const WallBox box = bounce_walls(spec);
            // Straight line to a mirrored image of the end point, folded back
            // into the wall box: one reflection off the bottom or top wall.
            const bool off_top = (spec.rng_seed >> 1) & 1;
            const double target_y =
                off_top ? 2.0 * box.y_lo - spec.end_y : 2.0 * box.y_hi - spec.end_y;
            px = spec.start_x + u * (spec.end_x - spec.start_x);
            const double raw_y = spec.start_y + u * (target_y - spec.start_y);
            py = fold(raw_y, box.y_lo, box.y_hi);
            px = fold(px, box.x_lo, box.x_hi);
            break;
        }
    }
    cx = px * spec.width;
    cy = py * spec.height;
}

namespace {

bool inside_shape(const ClipSpec& spec, double qx, double qy, double cx, double cy) {
    const double half = 0.5 * spec.size_px;
    switch (spec.shape_kind) {
        case ShapeKind::circle: {
            const double dx = qx - cx, dy = qy - cy;
            return dx * dx + dy * dy <= half * half;
        }
        case ShapeKind::square:
            return std::abs(qx - cx) <= half && std::abs(qy - cy) <= half;
        case ShapeKind::bar:  // vertical 1:3 bar, long side = size_px
            return std::abs(qx - cx) <= half / 3.0 && std::abs(qy - cy) <= half;
    }
    return false;
}

}  // namespace

Video make_clip(const ClipSpec& spec) {
    validate_spec(spec);
    constexpr int kSuper = 4;  // 4x4 subsamples per pixel; coverage is k/16, exact in f32
    Video video;
    video.data = Tensor4(spec.frames, 3, spec.height, spec.width);
    for (int i = 0; i < spec.frames; ++i) {
        double cx = 0.0, cy = 0.0;
        shape_center(spec, i, cx, cy);
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                int hits = 0;
                for (int sy = 0; sy < kSuper; ++sy) {
                    const double qy = y + (sy + 0.5) / kSuper;
                    for (int sx = 0; sx < kSuper; ++sx) {
                        const double qx = x + (sx + 0.5) / kSuper;
                        if (inside_shape(spec, qx, qy, cx, cy)) ++hits;
                    }
                }
                const double cov = hits / static_cast<double>(kSuper * kSuper);
                for (int ch = 0; ch < 3; ++ch) {
                    const double v = spec.background + cov * (spec.color[ch] - spec.background);
                    video.data.at(i, ch, y, x) = snap_f32(v);
                }
            }
        }
    }
    return video;
}

namespace {

nlohmann::json spec_to_json(const ClipSpec& s) {
    return {
        {"shape_kind", to_string(s.shape_kind)},
        {"size_px", s.size_px},
        {"start_pos", {s.start_x, s.start_y}},
        {"end_pos", {s.end_x, s.end_y}},
        {"trajectory", to_string(s.trajectory)},
        {"color", {s.color[0], s.color[1], s.color[2]}},
        {"background", s.background},
        {"frames", s.frames},
        {"height", s.height},
        {"width", s.width},
        {"rng_seed", s.rng_seed},
    };
}

ClipSpec spec_from_json(const nlohmann::json& j) {
    ClipSpec s;
    s.shape_kind = shape_kind_from_string(j.at("shape_kind"));
    s.size_px = j.at("size_px");
    s.start_x = j.at("start_pos")[0];
    s.start_y = j.at("start_pos")[1];
    s.end_x = j.at("end_pos")[0];
    s.end_y = j.at("end_pos")[1];
    s.trajectory = trajectory_from_string(j.at("trajectory"));
    for (int i = 0; i < 3; ++i) s.color[i] = j.at("color")[i];
    s.background = j.at("background");
    s.frames = j.at("frames");
    s.height = j.at("height");
    s.width = j.at("width");
    s.rng_seed = j.at("rng_seed");
    return s;
}

// Colors quantized to 8-bit levels: rendered pixels then land on a dyadic
// grid, which keeps the codec round trip exact (see codec tests).
double quantized_level(Rng& rng, double lo, double hi) {
    const int lo_q = static_cast<int>(std::ceil(lo * 256.0));
    const int hi_q = static_cast<int>(std::floor(hi * 256.0));
    return static_cast<double>(rng.uniform_int(lo_q, hi_q)) / 256.0;
}

ClipSpec draw_spec(const DatasetConfig& cfg, Rng& rng) {
    ClipSpec s;
    s.frames = cfg.frames;
    s.height = cfg.height;
    s.width = cfg.width;
    s.shape_kind = static_cast<ShapeKind>(rng.uniform_int(0, 2));
    s.size_px = static_cast<int>(rng.uniform_int(cfg.size_min, cfg.size_max));
    s.trajectory = static_cast<Trajectory>(rng.uniform_int(0, 2));
    const double m = cfg.position_margin;
    s.start_x = rng.uniform(m, 1.0 - m);
    s.start_y = rng.uniform(m, 1.0 - m);
    s.end_x = rng.uniform(m, 1.0 - m);
    s.end_y = rng.uniform(m, 1.0 - m);
    for (auto& c : s.color) c = quantized_level(rng, cfg.color_min, cfg.color_max);
    s.background = quantized_level(rng, cfg.background_min, cfg.background_max);
    s.rng_seed = rng.next_u64();
    return s;
}

}  // namespace

std::vector<const ManifestEntry*> DatasetManifest::split(const std::string& tag) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : clips)
        if (e.split == tag) out.push_back(&e);
    return out;
}

DatasetManifest make_dataset(const DatasetConfig& config, const std::string& out_dir) {
    if (config.count < 2) throw ValidationError("dataset config: count must be >= 2");
    if (config.train_fraction <= 0.0 || config.train_fraction >= 1.0)
        throw ValidationError("dataset config: train_fraction must be in (0,1)");
    if (config.size_min < 2 || config.size_max < config.size_min)
        throw ValidationError("dataset config: invalid size range");
    if (config.position_margin <= 0.0 || config.position_margin >= 0.5)
        throw ValidationError("dataset config: position_margin must be in (0, 0.5)");
    // Bounce endpoints must sit inside the walls for the largest shape.
    const double need = 0.5 * config.size_max / std::min(config.height, config.width);
    if (config.position_margin < need)
        throw ValidationError("dataset config: position_margin too small for size_max (need >= " +
                              std::to_string(need) + ")");

    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "clips", ec);
    if (ec) throw std::runtime_error("cannot create dataset directory: " + out_dir);

    Rng root(config.seed);
    Rng spec_rng = root.stream("specs");
    Rng split_rng = root.stream("split");

    DatasetManifest manifest;
    manifest.seed = config.seed;
    manifest.clips.resize(config.count);

    const int n_train = static_cast<int>(std::llround(config.count * config.train_fraction));
    if (n_train < 1 || n_train >= config.count)
        throw ValidationError("dataset config: split leaves an empty train or heldout set");
    std::vector<int> order(config.count);
    std::iota(order.begin(), order.end(), 0);
    for (int i = config.count - 1; i > 0; --i)
        std::swap(order[i], order[split_rng.uniform_int(0, i)]);

    std::vector<std::string> split_of(config.count, "heldout");
    for (int i = 0; i < n_train; ++i) split_of[order[i]] = "train";

    for (int i = 0; i < config.count; ++i) {
        ManifestEntry& e = manifest.clips[i];
        e.spec = draw_spec(config, spec_rng);
        char name[64];
        std::snprintf(name, sizeof(name), "clips/clip_%04d.clip", i);
        e.path = name;
        e.split = split_of[i];
        const std::string full = (fs::path(out_dir) / e.path).string();
        save_clip(make_clip(e.spec), full);
        e.checksum = file_checksum(full);
    }
    save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    nlohmann::json j;
    j["seed"] = manifest.seed;
    j["clips"] = nlohmann::json::array();
    for (const auto& e : manifest.clips)
        j["clips"].push_back({{"path", e.path},
                              {"spec", spec_to_json(e.spec)},
                              {"checksum", e.checksum},
                              {"split", e.split}});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << '\n';
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("manifest " + path + ": parse error: " + e.what());
    }
    DatasetManifest m;
    m.seed = j.at("seed");
    for (const auto& cj : j.at("clips")) {
        ManifestEntry e;
        e.path = cj.at("path");
        e.spec = spec_from_json(cj.at("spec"));
        e.checksum = cj.at("checksum");
        e.split = cj.at("split");
        if (e.split != "train" && e.split != "heldout")
            throw ValidationError("manifest " + path + ": unknown split tag " + e.split);
        m.clips.push_back(std::move(e));
    }
    return m;
}

Video load_clip_checked(const std::string& manifest_dir, const ManifestEntry& entry) {
    const std::string full = (fs::path(manifest_dir) / entry.path).string();
    const std::string sum = file_checksum(full);
    if (sum != entry.checksum)
        throw std::runtime_error("checksum mismatch for " + full + ": manifest " + entry.checksum +
                                 ", file " + sum);
    return load_clip(full);
}

}  // namespace efvi
