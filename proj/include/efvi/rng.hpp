// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

#include "efvi/common.hpp"

namespace efvi {

// xoshiro256++ with splitmix64 seeding. Self-contained so that every draw is
// reproducible across standard libraries and platforms; std::mt19937 plus
// std::normal_distribution would tie results to one stdlib implementation.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Standard normal via Box-Muller (paired; the spare is cached).
    double gaussian();

    bool bernoulli(double p) { return uniform() < p; }

    // Derive an independent stream. Streams are keyed by name so that adding
    // draws to one consumer never shifts another.
    Rng stream(std::string_view name) const;
    Rng stream(std::string_view name, std::uint64_t index) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t s_[4] = {};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace efvi
