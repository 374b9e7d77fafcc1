// Copyright 2026 The CollabLoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COLLABLOC_RNG_HPP_
#define COLLABLOC_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace collabloc {

// Seeded random stream. The engine is std::mt19937_64; the sampling
// transforms (uniform, gaussian, bounded ints) are spelled out here because
// the standard <random> distributions are implementation-defined and seeded
// runs must reproduce byte-for-byte across toolchains.
//
// Streams are split hierarchically with derive(): the child seed is a hash of
// the parent seed and the label, so the draw order of one stream never shifts
// the draws of another.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  size_t uniform_index(size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be > 0");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return static_cast<size_t>(v % n);
  }

  // Zero-mean gaussian via Box-Muller (second variate discarded so the
  // stream has no hidden cache state).
  double gaussian(double stddev) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double gaussian(double mean, double stddev) {
    return mean + gaussian(stddev);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Child stream keyed by (parent seed, label, index). Does not consume
  // entropy from this stream.
  Rng derive(std::string_view label, uint64_t index = 0) const {
    uint64_t h = 0xcbf29ce484222325ull ^ seed_;
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    h ^= index + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return Rng(mix(h));
  }

  // First `count` elements of a uniform permutation of `pool`, drawn without
  // replacement (partial Fisher-Yates).
  template <typename T>
  std::vector<T> sample_without_replacement(std::vector<T> pool, size_t count) {
    if (count > pool.size()) count = pool.size();
    for (size_t i = 0; i < count; ++i) {
      const size_t j = i + uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
  }

  uint64_t seed() const { return seed_; }

 private:
  // splitmix64 finalizer.
  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace collabloc

#endif  // COLLABLOC_RNG_HPP_
