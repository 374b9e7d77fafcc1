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

#include "collabloc/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace collabloc::fingerprint {

using nlohmann::json;

void validate_scan(const WifiScan& scan) {
  if (scan.readings.size() > kMaxApsPerScan)
    throw std::invalid_argument("scan holds more than 15 readings");
  std::set<std::string> seen;
  for (const auto& r : scan.readings) {
    if (r.bssid.empty()) throw std::invalid_argument("empty bssid in scan");
    if (!(r.rssi_dbm >= kMinRssiDbm && r.rssi_dbm <= kMaxRssiDbm))
      throw std::invalid_argument("rssi outside [-100, 0] dBm");
    if (!seen.insert(r.bssid).second)
      throw std::invalid_argument("duplicate bssid in scan: " + r.bssid);
  }
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

bool schema_matches(const FeatureVector& a, const FeatureVector& b) {
  if (a.numeric.size() != b.numeric.size() ||
      a.categorical.size() != b.categorical.size())
    return false;
  for (const auto& [name, _] : a.numeric)
    if (!b.numeric.count(name)) return false;
  for (const auto& [name, _] : a.categorical)
    if (!b.categorical.count(name)) return false;
  return true;
}

std::string to_string(const LocationLabel& label) {
  return label.building + "/" + label.room;
}

double cosine_similarity(const WifiScan& a, const WifiScan& b) {
  if (a.readings.empty() || b.readings.empty())
    throw std::invalid_argument("cosine_similarity: empty scan");
  validate_scan(a);
  validate_scan(b);

  std::map<std::string, double> b_mw;
  double norm_b = 0.0;
  for (const auto& r : b.readings) {
    const double mw = dbm_to_mw(r.rssi_dbm);
    b_mw[r.bssid] = mw;
    norm_b += mw * mw;
  }
  double dot = 0.0, norm_a = 0.0;
  for (const auto& r : a.readings) {
    const double mw = dbm_to_mw(r.rssi_dbm);
    norm_a += mw * mw;
    auto it = b_mw.find(r.bssid);
    if (it != b_mw.end()) dot += mw * it->second;
  }
  if (dot == 0.0) return 0.0;
  const double sim = dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
  return std::clamp(sim, 0.0, 1.0);
}

std::vector<std::pair<std::size_t, double>> match_entries(
    const LocalDatabase& db, const WifiScan& scan) {
  if (scan.readings.empty())
    throw std::invalid_argument("match_entries: empty scan");
  std::vector<std::pair<std::size_t, double>> matches;
  for (std::size_t i = 0; i < db.entries.size(); ++i) {
    const double sim = cosine_similarity(db.entries[i].scan, scan);
    if (sim > 0.0) matches.emplace_back(i, sim);
  }
  return matches;
}

namespace {

bool numeric_differs(double a, double b, double tolerance) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale == 0.0) return false;
  return std::abs(a - b) / scale > tolerance;
}

bool features_differ(const FeatureVector& a, const FeatureVector& b,
                     double tolerance) {
  for (const auto& [name, value] : a.categorical)
    if (b.categorical.at(name) != value) return true;
  for (const auto& [name, value] : a.numeric)
    if (numeric_differs(value, b.numeric.at(name), tolerance)) return true;
  return false;
}

}  // namespace

bool is_new_location(const LocalDatabase& db, const WifiScan& scan,
                     const FeatureVector& features) {
  if (db.entries.empty()) return true;
  if (!schema_matches(features, db.entries.front().features))
    throw std::invalid_argument("is_new_location: feature schema mismatch");

  std::size_t best = 0;
  double best_sim = -1.0;
  for (std::size_t i = 0; i < db.entries.size(); ++i) {
    const double sim = cosine_similarity(db.entries[i].scan, scan);
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  if (best_sim < db.sim_threshold) return true;
  return features_differ(features, db.entries[best].features,
                         db.numeric_tolerance);
}

void insert_entry(LocalDatabase& db, Entry entry) {
  validate_scan(entry.scan);
  if (entry.label.building.empty() || entry.label.room.empty())
    throw std::invalid_argument("insert_entry: empty label component");
  if (!db.entries.empty() &&
      !schema_matches(entry.features, db.entries.front().features))
    throw std::invalid_argument("insert_entry: feature schema mismatch");
  db.entries.push_back(std::move(entry));
}

std::vector<LocationLabel> distinct_labels(const LocalDatabase& db) {
  std::set<LocationLabel> labels;
  for (const auto& e : db.entries) labels.insert(e.label);
  return {labels.begin(), labels.end()};
}

namespace {

json entry_to_json(const Entry& e) {
  json wifi = json::array();
  for (const auto& r : e.scan.readings)
    wifi.push_back({{"bssid", r.bssid}, {"rssi_dbm", r.rssi_dbm}});
  return json{{"wifi", std::move(wifi)},
              {"captured_at", e.scan.captured_at},
              {"numeric", e.features.numeric},
              {"categorical", e.features.categorical},
              {"building", e.label.building},
              {"room", e.label.room},
              {"recorded_at", e.recorded_at}};
}

Entry entry_from_json(const json& j) {
  Entry e;
  for (const auto& r : j.at("wifi"))
    e.scan.readings.push_back(
        {r.at("bssid").get<std::string>(), r.at("rssi_dbm").get<double>()});
  e.scan.captured_at = j.at("captured_at").get<double>();
  e.features.numeric = j.at("numeric").get<std::map<std::string, double>>();
  e.features.categorical =
      j.at("categorical").get<std::map<std::string, std::string>>();
  e.label.building = j.at("building").get<std::string>();
  e.label.room = j.at("room").get<std::string>();
  e.recorded_at = j.at("recorded_at").get<double>();
  return e;
}

}  // namespace

void save_database_jsonl(const LocalDatabase& db, std::ostream& out) {
  for (const auto& e : db.entries) out << entry_to_json(e).dump() << "\n";
}

LocalDatabase load_database_jsonl(std::istream& in, double sim_threshold) {
  LocalDatabase db;
  db.sim_threshold = sim_threshold;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    insert_entry(db, entry_from_json(json::parse(line)));
  }
  return db;
}

void save_database_jsonl_file(const LocalDatabase& db, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  save_database_jsonl(db, out);
}

LocalDatabase load_database_jsonl_file(const std::string& path,
                                       double sim_threshold) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  return load_database_jsonl(in, sim_threshold);
}

}  // namespace collabloc::fingerprint
