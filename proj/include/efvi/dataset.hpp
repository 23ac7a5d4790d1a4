// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "efvi/rng.hpp"
#include "efvi/video.hpp"

namespace efvi {

enum class ShapeKind { circle, square, bar };
enum class Trajectory { linear, arc, bounce };

const char* to_string(ShapeKind k);
const char* to_string(Trajectory t);
ShapeKind shape_kind_from_string(const std::string& s);
Trajectory trajectory_from_string(const std::string& s);

struct ClipSpec {
    ShapeKind shape_kind = ShapeKind::circle;
    int size_px = 10;
    double start_x = 0.3, start_y = 0.5;
    double end_x = 0.7, end_y = 0.5;
    Trajectory trajectory = Trajectory::linear;
    std::array<double, 3> color = {0.9, 0.9, 0.9};
    double background = 0.1;
    int frames = 9;
    int height = 32, width = 32;
    std::uint64_t rng_seed = 0;
};

// Throws ValidationError naming the offending field.
void validate_spec(const ClipSpec& spec);

// Shape center in pixel coordinates for frame i (0-based). Exposed so tests
// can compare rendered centroids against the analytic path.
void shape_center(const ClipSpec& spec, int frame_index, double& cx, double& cy);

// Deterministic render: same spec, bit-identical Video. Pixels are snapped to
// the float32 grid so clip files round-trip exactly.
Video make_clip(const ClipSpec& spec);

struct DatasetConfig {
    int count = 544;
    double train_fraction = 16.0 / 17.0;  // 512 train / 32 heldout at the default count
    int frames = 9;
    int height = 32, width = 32;
    int size_min = 8, size_max = 12;
    double position_margin = 0.22;
    double background_min = 0.05, background_max = 0.35;
    double color_min = 0.5, color_max = 1.0;
    std::uint64_t seed = 0;
};

struct ManifestEntry {
    std::string path;  // relative to the manifest's directory
    ClipSpec spec;
    std::string checksum;
    std::string split;  // "train" | "heldout"
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> clips;

    std::vector<const ManifestEntry*> split(const std::string& tag) const;
};

DatasetManifest make_dataset(const DatasetConfig& config, const std::string& out_dir);

void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Loads a manifest entry relative to the manifest directory and verifies its
// checksum.
Video load_clip_checked(const std::string& manifest_dir, const ManifestEntry& entry);

}  // namespace efvi
