// SPDX-License-Identifier: Apache-2.0

#include "rlx/rng.hpp"

#include <cassert>
#include <cmath>

namespace rlx {

uint64_t mix_seed(uint64_t seed) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int Rng::next_int(int lo, int hi) {
  assert(lo <= hi);
  const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  // Rejection-free modulo; bias is negligible for the tiny spans used here
  // and determinism is what matters.
  return lo + static_cast<int>(next_u64() % span);
}

double Rng::next_gaussian() {
  // Box-Muller; u1 shifted away from zero to keep log finite.
  const double u1 = 1.0 - next_unit();
  const double u2 = next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

size_t weighted_pick(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  assert(total > 0.0);
  double u = rng.next_unit() * total;
  for (size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return i;
  }
  return weights.size() - 1;  // rounding fell off the end
}

}  // namespace rlx
