// SPDX-License-Identifier: Apache-2.0
#include "efvi/rng.hpp"

#include <cmath>

namespace efvi {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    // Rejection sampling keeps the distribution exact.
    const std::uint64_t limit = span == 0 ? 0 : UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r = next_u64();
    if (span != 0) {
        while (r >= limit) r = next_u64();
        r %= span;
    }
    return lo + static_cast<std::int64_t>(r);
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 1 - u avoids log(0).
    const double u = 1.0 - uniform();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 2.0 * 3.14159265358979323846 * v;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

Rng Rng::stream(std::string_view name) const {
    std::uint64_t x = seed_ ^ fnv1a64(name);
    return Rng(splitmix64(x));
}

Rng Rng::stream(std::string_view name, std::uint64_t index) const {
    std::uint64_t x = seed_ ^ fnv1a64(name) ^ (0x9e3779b97f4a7c15ull * (index + 1));
    return Rng(splitmix64(x));
}

}  // namespace efvi
