/*
 * Copyright 2026 RingFed Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ringfed {

/// One splitmix64 step. Used both as a stream-seed hash and inside Rng::fork.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Hash a (seed, tag) pair into a fresh stream seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL + tag * 0xd1342543de82ef95ULL);
  splitmix64(s);
  return splitmix64(s);
}

/// Seeded random stream. Distributions are implemented by hand so that the
/// byte-for-byte reproducibility contract does not depend on the standard
/// library's unspecified distribution algorithms; mt19937_64 itself is fully
/// specified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    // Modulo bias is < 2^-40 for the ranges used here (all << 2^24).
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  /// Standard normal via Box-Muller; always consumes exactly two draws.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Poisson via Knuth's product method; fine for the small means used here.
  int poisson(double mean) {
    const double limit = std::exp(-mean);
    double prod = uniform();
    int count = 0;
    while (prod > limit) {
      ++count;
      prod *= uniform();
    }
    return count;
  }

  /// Independent substream; depends only on (seed, tag), not on draw position.
  Rng fork(std::uint64_t tag) const { return Rng(derive_seed(seed_, tag)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace ringfed
