// SPDX-License-Identifier: Apache-2.0
#include "efvi/video.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "efvi/common.hpp"

namespace efvi {

static_assert(std::endian::native == std::endian::little,
              "clip and checkpoint formats are little-endian; byte swapping is not implemented");

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

void validate_video(const Video& video) {
    if (video.channels() != 3)
        throw ValidationError("video: channel count must be 3, got " + std::to_string(video.channels()));
    if (video.frames() < 3 || video.frames() % 2 == 0)
        throw ValidationError("video: frame count must be odd and >= 3, got " + std::to_string(video.frames()));
    for (double x : video.data.v) {
        if (!std::isfinite(x)) throw ValidationError("video: non-finite pixel value");
        if (x < 0.0 || x > 1.0) throw ValidationError("video: pixel value outside [0,1]");
    }
}

void save_clip(const Video& video, const std::string& path) {
    nlohmann::json header = {
        {"F", video.frames()}, {"C", video.channels()}, {"H", video.height()}, {"W", video.width()},
        {"dtype", "f32"},      {"byte_order", "little"},
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << header.dump() << '\n';
    std::vector<float> payload(video.data.size());
    for (std::size_t i = 0; i < payload.size(); ++i)
        payload[i] = static_cast<float>(video.data.v[i]);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

Video load_clip(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("clip " + path + ": malformed header (missing line)");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("clip " + path + ": malformed header: " + e.what());
    }
    for (const char* key : {"F", "C", "H", "W", "dtype", "byte_order"})
        if (!header.contains(key)) throw ValidationError("clip " + path + ": header missing field " + std::string(key));
    if (header["dtype"] != "f32") throw ValidationError("clip " + path + ": unsupported dtype");
    if (header["byte_order"] != "little") throw ValidationError("clip " + path + ": unsupported byte order");

    const int f = header["F"], c = header["C"], h = header["H"], w = header["W"];
    if (f < 3 || f % 2 == 0)
        throw ValidationError("clip " + path + ": header F must be odd and >= 3, got " + std::to_string(f));
    if (c != 3) throw ValidationError("clip " + path + ": header C must be 3, got " + std::to_string(c));
    if (h <= 0 || w <= 0) throw ValidationError("clip " + path + ": non-positive H or W");

    Video video;
    video.data = Tensor4(f, c, h, w);
    std::vector<float> payload(video.data.size());
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != payload.size() * sizeof(float) || in.peek() != EOF)
        throw ValidationError("clip " + path + ": payload length mismatch");
    for (std::size_t i = 0; i < payload.size(); ++i) {
        if (!std::isfinite(payload[i])) throw ValidationError("clip " + path + ": non-finite pixel");
        video.data.v[i] = static_cast<double>(payload[i]);
    }
    return video;
}

std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hex64(fnv1a64(bytes.data(), bytes.size()));
}

}  // namespace efvi
