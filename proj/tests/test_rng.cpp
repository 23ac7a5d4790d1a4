// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "efvi/rng.hpp"

using namespace efvi;

TEST_CASE("rng determinism and stream independence") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng root(7);
    Rng s1 = root.stream("train");
    Rng s2 = root.stream("train");
    Rng s3 = root.stream("sample");
    CHECK(s1.next_u64() == s2.next_u64());
    CHECK(s1.next_u64() != s3.next_u64());

    // Indexed streams differ from each other and from the base stream.
    CHECK(root.stream("x", 0).seed() != root.stream("x", 1).seed());
    CHECK(root.stream("x", 0).seed() != root.stream("x").seed());
}

TEST_CASE("rng uniform and gaussian ranges") {
    Rng rng(3);
    double sum = 0.0, sum2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.02);

    sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sum2 += g * g;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("rng uniform_int covers bounds") {
    Rng rng(11);
    bool lo = false, hi = false;
    for (int i = 0; i < 1000; ++i) {
        const auto v = rng.uniform_int(2, 5);
        CHECK(v >= 2);
        CHECK(v <= 5);
        lo = lo || v == 2;
        hi = hi || v == 5;
    }
    CHECK(lo);
    CHECK(hi);
}
