// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

namespace sd4r {

// splitmix64 mixing step; also used to derive independent child seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic stream id: (master, stream, index) -> seed. Every consumer in
// the pipeline derives its own stream so call order elsewhere cannot perturb
// it. Distribution sampling below is hand-rolled on purpose: std::*
// distributions are not bit-reproducible across standard libraries.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = mix64(z);
  z += 0x9e3779b97f4a7c15ULL * (index + 1);
  return mix64(z);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [lo, hi] inclusive. Modulo bias is irrelevant at the scales
  // used here (ranges far below 2^32).
  int int_range(int lo, int hi) {
    if (hi <= lo) return lo;
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

  // Box-Muller without caching so the draw count per call is fixed.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

 private:
  std::uint64_t state_;
};

// Fixed stream ids so independent pipeline stages never share a stream.
namespace rng_stream {
inline constexpr std::uint64_t kModelInit = 1;
inline constexpr std::uint64_t kScene = 2;
inline constexpr std::uint64_t kEpochShuffle = 3;
inline constexpr std::uint64_t kGradCheck = 4;
}  // namespace rng_stream

}  // namespace sd4r
