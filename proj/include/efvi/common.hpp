// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace efvi {

// Invalid input or configuration (CLI exit code 1). Runtime failures use
// std::runtime_error directly (exit code 2).
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    return fnv1a64(s.data(), s.size());
}

std::string hex64(std::uint64_t v);

// Round a double through float32. Model parameters and clip pixels live on
// the float32 grid so that the f32 on-disk formats round-trip bit-exactly.
inline double snap_f32(double v) {
    return static_cast<double>(static_cast<float>(v));
}

}  // namespace efvi
