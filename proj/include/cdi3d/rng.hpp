// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cdi3d {

// splitmix64 finalizer; used both as a seed mixer and a cheap hash.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives the seed of a named substream from a master seed. All randomness in
// the pipeline flows through these streams so that a single config seed pins
// every stochastic step ("dvi/train", "recon/rays", ...).
uint64_t seed_stream(uint64_t master, std::string_view stream_name);

// mt19937_64 wrapper with a portable Box-Muller gaussian (std::normal_distribution
// is implementation-defined, which would break byte-identical replay across stdlibs).
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // inclusive bounds, unbiased via rejection
  int64_t uniform_int(int64_t lo, int64_t hi);

  double gaussian();

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cdi3d
