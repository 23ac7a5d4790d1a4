// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "efvi/tensor.hpp"

namespace efvi {

// Pixel-space clip, values in [0, 1], frame count odd. Invariants are
// enforced at dataset and file-IO boundaries, not on every construction:
// codec probes legitimately build out-of-range tensors.
struct Video {
    Tensor4 data;  // (F, C, H, W)
    int fps = 8;

    int frames() const { return data.n; }
    int channels() const { return data.c; }
    int height() const { return data.h; }
    int width() const { return data.w; }
};

// Throws ValidationError if the Video invariants (C == 3, odd F, finite
// values in [0, 1]) do not hold.
void validate_video(const Video& video);

// Clip file: one JSON header line {"F","C","H","W","dtype":"f32",
// "byte_order":"little"} terminated by '\n', then the raw little-endian
// float32 tensor, F-major then C then row-major HxW.
void save_clip(const Video& video, const std::string& path);
Video load_clip(const std::string& path);

// FNV-1a over the full file bytes, as stored in dataset manifests.
std::string file_checksum(const std::string& path);

}  // namespace efvi
