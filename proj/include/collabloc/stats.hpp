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

#ifndef COLLABLOC_STATS_HPP_
#define COLLABLOC_STATS_HPP_

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace collabloc::stats {

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Unbiased sample standard deviation.
inline double stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

// Normal-approximation 95% confidence half-width of the sample mean.
inline double half_width_95(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return 1.96 * stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

// z statistic for H1: mean(a) > mean(b), two independent samples.
inline double welch_z(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  const double va = stddev(a) * stddev(a) / static_cast<double>(a.size());
  const double vb = stddev(b) * stddev(b) / static_cast<double>(b.size());
  const double denom = std::sqrt(va + vb);
  if (denom == 0.0) return ma > mb ? 1e9 : (ma < mb ? -1e9 : 0.0);
  return (ma - mb) / denom;
}

// z statistic for H1: mean(a - b) > 0 on paired samples.
inline double paired_z(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("paired_z: size mismatch");
  std::vector<double> d(a.size());
  for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double sd = stddev(d);
  if (sd == 0.0) return mean(d) > 0 ? 1e9 : (mean(d) < 0 ? -1e9 : 0.0);
  return mean(d) / (sd / std::sqrt(static_cast<double>(d.size())));
}

// One-sided 95% critical value for the z statistics above.
inline constexpr double kZ95 = 1.645;

}  // namespace collabloc::stats

#endif  // COLLABLOC_STATS_HPP_
