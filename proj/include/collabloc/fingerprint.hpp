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

#ifndef COLLABLOC_FINGERPRINT_HPP_
#define COLLABLOC_FINGERPRINT_HPP_

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace collabloc::fingerprint {

inline constexpr std::size_t kMaxApsPerScan = 15;
inline constexpr double kMinRssiDbm = -100.0;
inline constexpr double kMaxRssiDbm = 0.0;

// One observed access point: opaque identifier plus signal strength in dBm.
struct AccessPointReading {
  std::string bssid;
  double rssi_dbm = kMinRssiDbm;
};

// A device's Wi-Fi snapshot. BSSIDs are pairwise distinct and the list is
// capped at the 15 strongest APs at collection time.
struct WifiScan {
  std::vector<AccessPointReading> readings;
  double captured_at = 0.0;
};

// Throws std::invalid_argument on duplicate bssids, empty bssids, RSSI
// outside [-100, 0] dBm, or more than 15 readings.
void validate_scan(const WifiScan& scan);

// Linear power in milliwatts for a dBm value.
double dbm_to_mw(double dbm);

// Non-Wi-Fi location features. Numeric values carry their natural units
// (sound_level: amplitude counts; cell_signal_dbm: dBm); categorical values
// are opaque codes (cell_tower_id, lac).
struct FeatureVector {
  std::map<std::string, double> numeric;
  std::map<std::string, std::string> categorical;
};

// Same feature names on both sides (values may differ).
bool schema_matches(const FeatureVector& a, const FeatureVector& b);

struct LocationLabel {
  std::string building;
  std::string room;
  auto operator<=>(const LocationLabel&) const = default;
};

std::string to_string(const LocationLabel& label);

// One row of a device's knowledge store.
struct Entry {
  WifiScan scan;
  FeatureVector features;
  LocationLabel label;
  double recorded_at = 0.0;
};

// Per-device database. Entries are append-only within a run; the schema is
// fixed by the first entry.
struct LocalDatabase {
  std::vector<Entry> entries;
  double sim_threshold = 0.05;
  // Relative difference beyond which a numeric feature counts as "different"
  // for new-location detection.
  double numeric_tolerance = 0.10;
};

// Cosine similarity of two AP lists over linear-milliwatt strengths, with
// cross terms restricted to equal bssids. Result in [0, 1]; symmetric.
// Throws std::invalid_argument if either scan is empty or invalid.
double cosine_similarity(const WifiScan& a, const WifiScan& b);

// Indices of entries with cosine_similarity > 0, ascending, each paired with
// its similarity. An empty result signals "NA" upstream.
std::vector<std::pair<std::size_t, double>> match_entries(
    const LocalDatabase& db, const WifiScan& scan);

// True iff the scan matches nothing above db.sim_threshold, or the
// best-matching entry (argmax similarity, lowest index on ties) disagrees on
// some feature: categorical by inequality, numeric by relative difference
// beyond db.numeric_tolerance.
bool is_new_location(const LocalDatabase& db, const WifiScan& scan,
                     const FeatureVector& features);

// Appends one entry. Throws std::invalid_argument on schema mismatch with
// the existing entries or an invalid scan.
void insert_entry(LocalDatabase& db, Entry entry);

// Distinct labels over all entries, sorted.
std::vector<LocationLabel> distinct_labels(const LocalDatabase& db);

// Line-delimited JSON serialization; see docs/schemas.md. Round-trips are
// lossless.
void save_database_jsonl(const LocalDatabase& db, std::ostream& out);
LocalDatabase load_database_jsonl(std::istream& in, double sim_threshold = 0.05);
void save_database_jsonl_file(const LocalDatabase& db, const std::string& path);
LocalDatabase load_database_jsonl_file(const std::string& path,
                                       double sim_threshold = 0.05);

}  // namespace collabloc::fingerprint

#endif  // COLLABLOC_FINGERPRINT_HPP_
