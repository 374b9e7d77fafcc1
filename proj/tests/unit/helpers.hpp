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

#ifndef COLLABLOC_TESTS_HELPERS_HPP_
#define COLLABLOC_TESTS_HELPERS_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "collabloc/fingerprint.hpp"
#include "collabloc/rng.hpp"

namespace testutil {

using collabloc::Rng;
using collabloc::fingerprint::AccessPointReading;
using collabloc::fingerprint::FeatureVector;
using collabloc::fingerprint::LocationLabel;
using collabloc::fingerprint::WifiScan;

inline WifiScan scan_of(
    const std::vector<std::pair<std::string, double>>& readings) {
  WifiScan scan;
  for (const auto& [bssid, rssi] : readings)
    scan.readings.push_back({bssid, rssi});
  return scan;
}

// Random scan over an AP universe "ap0".."ap{universe-1}".
inline WifiScan random_scan(Rng& rng, int universe, int min_aps = 1,
                            int max_aps = 10) {
  const int count =
      min_aps + static_cast<int>(rng.uniform_index(max_aps - min_aps + 1));
  std::vector<std::string> ids;
  for (int i = 0; i < universe; ++i) ids.push_back("ap" + std::to_string(i));
  auto picked = rng.sample_without_replacement(ids, count);
  WifiScan scan;
  for (const auto& id : picked)
    scan.readings.push_back({id, rng.uniform(-95.0, -30.0)});
  return scan;
}

// Straight-line evaluation of the similarity formula, kept independent of
// the library implementation.
inline double reference_similarity(const WifiScan& a, const WifiScan& b) {
  auto mw = [](double dbm) { return std::pow(10.0, dbm / 10.0); };
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& ra : a.readings) {
    na += mw(ra.rssi_dbm) * mw(ra.rssi_dbm);
    for (const auto& rb : b.readings)
      if (ra.bssid == rb.bssid) dot += mw(ra.rssi_dbm) * mw(rb.rssi_dbm);
  }
  for (const auto& rb : b.readings) nb += mw(rb.rssi_dbm) * mw(rb.rssi_dbm);
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline FeatureVector features_of(double sound, double cell_dbm,
                                 const std::string& tower,
                                 const std::string& lac) {
  FeatureVector f;
  f.numeric["sound_level"] = sound;
  f.numeric["cell_signal_dbm"] = cell_dbm;
  f.categorical["cell_tower_id"] = tower;
  f.categorical["lac"] = lac;
  return f;
}

}  // namespace testutil

#endif  // COLLABLOC_TESTS_HELPERS_HPP_
