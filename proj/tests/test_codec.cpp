// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "efvi/codec.hpp"
#include "efvi/rng.hpp"

using namespace efvi;

namespace {

// Scalar-per-frame video (1x1 pixel, one channel).
Video scalar_video(const std::vector<double>& frames) {
    Video v;
    v.data = Tensor4(static_cast<int>(frames.size()), 1, 1, 1);
    for (std::size_t i = 0; i < frames.size(); ++i) v.data.v[i] = frames[i];
    return v;
}

// Random clip on a dyadic grid (multiples of 1/1024), exactly representable
// in float32: the codec's +,-,/2 arithmetic is then exact.
Video random_clip(int frames, int c, int h, int w, Rng& rng) {
    Video v;
    v.data = Tensor4(frames, c, h, w);
    for (auto& x : v.data.v) x = static_cast<double>(rng.uniform_int(0, 1024)) / 1024.0;
    return v;
}

}  // namespace

TEST_CASE("causal encode of a constant video") {
    Video v;
    v.data = Tensor4(5, 3, 4, 4);
    std::fill(v.data.v.begin(), v.data.v.end(), 0.5);
    const Latent z = encode(v, LatentMode::causal);
    CHECK(z.frames() == 3);
    CHECK(z.channels() == 6);
    const std::size_t plane = static_cast<std::size_t>(3) * 4 * 4;
    for (int k = 0; k < 3; ++k) {
        const double* avg = z.data.frame(k);
        for (std::size_t i = 0; i < plane; ++i) {
            CHECK(avg[i] == 0.5);           // avg channels
            CHECK(avg[plane + i] == 0.0);   // diff channels
        }
    }
}

TEST_CASE("causal encode of the scalar ramp matches hand Haar arithmetic") {
    const Video v = scalar_video({1, 2, 3, 4, 5});
    const Latent z = encode(v, LatentMode::causal);
    REQUIRE(z.frames() == 3);
    // Hand oracle: z = [(1,0), (2.5,0.5), (4.5,0.5)].
    CHECK(z.data.at(0, 0, 0, 0) == 1.0);
    CHECK(z.data.at(0, 1, 0, 0) == 0.0);
    CHECK(z.data.at(1, 0, 0, 0) == 2.5);
    CHECK(z.data.at(1, 1, 0, 0) == 0.5);
    CHECK(z.data.at(2, 0, 0, 0) == 4.5);
    CHECK(z.data.at(2, 1, 0, 0) == 0.5);
}

TEST_CASE("spatial_only mode is the identity") {
    Rng rng(4);
    const Video v = random_clip(5, 3, 4, 4, rng);
    const Latent z = encode(v, LatentMode::spatial_only);
    CHECK(z.frames() == 5);
    CHECK(z.channels() == 3);
    CHECK(z.data.v == v.data.v);
    CHECK(decode(z).data.v == v.data.v);
}

TEST_CASE("decode is the exact inverse of encode") {
    Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        const Video v = random_clip(9, 3, 8, 8, rng);
        for (auto mode : {LatentMode::causal, LatentMode::spatial_only}) {
            const Video back = decode(encode(v, mode));
            CHECK(back.data.v == v.data.v);  // bit-exact
        }
    }
}

TEST_CASE("decode of the flipped ramp latent matches the hand oracle") {
    const Video v = scalar_video({1, 2, 3, 4, 5});
    const Latent zf = flip(encode(v, LatentMode::causal));
    const Video d = decode(zf);
    REQUIRE(d.frames() == 5);
    const double expected[5] = {4.5, 2, 3, 1, 1};
    for (int i = 0; i < 5; ++i) CHECK(d.data.at(i, 0, 0, 0) == expected[i]);
}

TEST_CASE("flip is an involution and reverses frames") {
    Rng rng(13);
    const Video v = random_clip(3, 3, 2, 2, rng);
    const Video f = flip(v);
    const std::size_t plane = v.data.frame_size();
    for (std::size_t q = 0; q < plane; ++q) {
        CHECK(f.data.frame(0)[q] == v.data.frame(2)[q]);
        CHECK(f.data.frame(1)[q] == v.data.frame(1)[q]);
        CHECK(f.data.frame(2)[q] == v.data.frame(0)[q]);
    }
    CHECK(flip(f).data.v == v.data.v);

    // Palindromic video is a fixed point.
    Video p = v;
    std::copy(p.data.frame(0), p.data.frame(0) + plane, p.data.frame(2));
    CHECK(flip(p).data.v == p.data.v);
}

TEST_CASE("flip probe: spatial codec commutes, causal codec does not") {
    Rng rng(77);
    for (int rep = 0; rep < 10; ++rep) {
        const Video v = random_clip(9, 3, 8, 8, rng);
        const ProbeReport sp = flip_probe(v, LatentMode::spatial_only);
        CHECK(sp.commutator_norm == 0.0);
        CHECK(sp.roundtrip_mse == 0.0);
        CHECK(sp.flipdecode_mse == 0.0);

        const ProbeReport ca = flip_probe(v, LatentMode::causal);
        CHECK(ca.roundtrip_mse == 0.0);
        CHECK(ca.commutator_norm > 0.0);
        CHECK(ca.flipdecode_mse > 0.0);
    }
}

TEST_CASE("flip probe on a constant (palindromic) video") {
    Video v;
    v.data = Tensor4(7, 3, 4, 4);
    std::fill(v.data.v.begin(), v.data.v.end(), 0.25);
    const ProbeReport r = flip_probe(v, LatentMode::causal);
    CHECK(r.roundtrip_mse == 0.0);
    CHECK(r.flipdecode_mse == 0.0);
}

TEST_CASE("flip probe on the scalar ramp gives mse 1.05") {
    const Video v = scalar_video({1, 2, 3, 4, 5});
    const ProbeReport r = flip_probe(v, LatentMode::causal);
    // Decoded flipped latent (4.5, 2, 3, 1, 1) vs flipped truth (5, 4, 3, 2, 1):
    // (0.25 + 4 + 0 + 1 + 0) / 5 = 1.05.
    CHECK(r.flipdecode_mse == doctest::Approx(1.05).epsilon(1e-12));
    CHECK(r.roundtrip_mse == 0.0);
}

TEST_CASE("causality: latent frames 1..k ignore pixels after frame 2k-1") {
    Rng rng(31);
    const Video v = random_clip(9, 1, 4, 4, rng);
    const Latent z = encode(v, LatentMode::causal);
    for (int k = 1; k <= z.frames(); ++k) {
        Video w = v;
        const std::size_t plane = w.data.frame_size();
        for (int i = 2 * k - 1; i < w.frames(); ++i)  // frames > 2k-1 (1-based)
            std::fill(w.data.frame(i), w.data.frame(i) + plane, 0.0);
        const Latent zw = encode(w, LatentMode::causal);
        const std::size_t lplane = z.data.frame_size();
        for (int j = 0; j < k; ++j)
            for (std::size_t q = 0; q < lplane; ++q)
                CHECK(zw.data.frame(j)[q] == z.data.frame(j)[q]);
    }
}

TEST_CASE("encode is linear in its input") {
    Rng rng(55);
    const Video x = random_clip(5, 1, 2, 2, rng);
    const Video y = random_clip(5, 1, 2, 2, rng);
    const double a = 0.5, b = 0.25;  // dyadic factors keep arithmetic exact
    Video combo = x;
    for (std::size_t i = 0; i < combo.data.v.size(); ++i)
        combo.data.v[i] = a * x.data.v[i] + b * y.data.v[i];
    for (auto mode : {LatentMode::causal, LatentMode::spatial_only}) {
        const Latent zc = encode(combo, mode);
        const Latent zx = encode(x, mode), zy = encode(y, mode);
        for (std::size_t i = 0; i < zc.data.v.size(); ++i)
            CHECK(zc.data.v[i] == doctest::Approx(a * zx.data.v[i] + b * zy.data.v[i]).epsilon(1e-15));
    }
}

TEST_CASE("causal encode rejects even frame counts") {
    Video v;
    v.data = Tensor4(4, 1, 2, 2);
    CHECK_THROWS_AS(encode(v, LatentMode::causal), ValidationError);
}

TEST_CASE("encode_frame builds the single-frame rule") {
    Tensor4 frame(1, 3, 4, 4);
    Rng rng(2);
    for (auto& x : frame.v) x = rng.uniform();
    const Latent z = encode_frame(frame);
    CHECK(z.frames() == 1);
    CHECK(z.channels() == 6);
    const std::size_t plane = frame.frame_size();
    for (std::size_t i = 0; i < plane; ++i) {
        CHECK(z.data.v[i] == frame.v[i]);
        CHECK(z.data.v[plane + i] == 0.0);
    }
}
