// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace nif {

inline constexpr uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline constexpr uint64_t hash_combine(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

/// Small counter-keyed generator. Streams are addressed by (seed, pixel,
/// sample) so results do not depend on the order in which pixels are visited.
class Sampler {
  public:
    Sampler() = default;
    explicit Sampler(uint64_t seed) : state_(splitmix64(seed)) {}
    Sampler(uint64_t seed, uint64_t pixel, uint64_t sample)
        : state_(hash_combine(hash_combine(splitmix64(seed), pixel), sample)) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_1d() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    struct Pair {
        double u, v;
    };
    Pair next_2d() {
        double a = next_1d();
        double b = next_1d();
        return {a, b};
    }

  private:
    uint64_t state_ = 0;
};

}  // namespace nif
