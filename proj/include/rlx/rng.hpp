// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random number generation. All randomness in the project goes
// through this wrapper so that a (seed, config) pair fully determines every
// sample, every init, and every metrics file. Distribution mappings are
// hand-rolled because the std::<distribution> classes are implementation
// defined and would break byte-level run reproducibility across toolchains.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace rlx {

// splitmix64 finalizer; used to decorrelate seeds and derive child streams.
uint64_t mix_seed(uint64_t seed);

class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(mix_seed(seed)) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [lo, hi] inclusive.
  int next_int(int lo, int hi);

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  // Standard normal via Box-Muller (one value per call, no caching so the
  // stream position stays easy to reason about).
  double next_gaussian();

  // Child generator with an independent stream; does not advance the parent.
  Rng split(uint64_t stream) const {
    return Rng(mix_seed(seed_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1))));
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

// Weighted index draw by inverse CDF; weights must be non-negative with a
// positive sum.
size_t weighted_pick(const std::vector<double>& weights, Rng& rng);

}  // namespace rlx
