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

#ifndef COLLABLOC_SIM_HPP_
#define COLLABLOC_SIM_HPP_

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "collabloc/overlay.hpp"

namespace collabloc::sim {

using classifier::ClassifierKind;
using fingerprint::FeatureVector;
using fingerprint::LocalDatabase;
using fingerprint::LocationLabel;
using fingerprint::WifiScan;
using privacy::AreaLevel;

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Synthetic world

struct WorldConfig {
  int buildings = 15;
  int rooms_min = 3;
  int rooms_max = 4;
  int aps_per_building = 6;
  double path_loss_exponent = 3.0;   // gamma
  double reference_power_dbm = -40;  // P0 at 1 m
  double shadowing_sigma_db = 2.0;
  int towers = 2;
  int decoy_pool_per_tower = 1000;
  double building_spacing_m = 400.0;
  double room_spacing_m = 6.0;
  uint64_t seed = 0;  // mandatory in config files
};

WorldConfig world_config_from_json(const nlohmann::json& j);
nlohmann::json world_config_to_json(const WorldConfig& config);

// Free-space reference: P0 - 10 * gamma * log10(d), with d floored at 1 m.
double path_loss_rssi(double p0_dbm, double gamma, double distance_m);

struct Room {
  LocationLabel label;
  double x = 0.0, y = 0.0;
  std::string tower;
  // Audible APs (true RSSI > -100 dBm) sorted strongest first. The static
  // shadowing draw is baked into these ground-truth strengths.
  std::vector<std::pair<std::string, double>> audible;
  double sound_level = 0.0;      // amplitude counts
  double cell_signal_dbm = -80;  // dBm
  std::string cell_tower_id;
  std::string lac;
};

struct World {
  WorldConfig config;
  std::vector<Room> rooms;
  std::vector<std::string> towers;
  // country, state, county, city region names (single chain).
  std::string country, state, county, city;
  // Decoy label directory per tower region: real labels plus synthetic
  // points of interest.
  std::map<std::string, std::vector<LocationLabel>> tower_pools;

  const Room& room(const LocationLabel& label) const;
  std::vector<LocationLabel> labels() const;
  // Pool for a provider anonymized at `level` around `home_tower`.
  privacy::LabelPool pool_for(const std::string& home_tower,
                              AreaLevel level) const;
  uint64_t digest() const;

 private:
  friend World generate_world(const WorldConfig&);
  std::map<LocationLabel, std::size_t> index_;
};

// Deterministic in config.seed. Throws GenerationError when some room hears
// no AP above -100 dBm.
World generate_world(const WorldConfig& config);

nlohmann::json world_to_json(const World& world);

// Overlay topology for the world's region chain.
overlay::TopologyConfig world_topology(const World& world,
                                       const std::array<int, 5>& replication);

// ---------------------------------------------------------------------------
// Devices

struct DeviceProfile {
  std::string id;
  double detection_probability = 0.9;
  double rssi_jitter_db = 3.0;
  double sound_noise_rel = 0.08;
  double cell_noise_db = 1.5;
  std::vector<LocationLabel> coverage;
  std::string home_tower;
  AreaLevel area_level = AreaLevel::kCity;
};

// One noisy observation at a place. The scan may come back empty when every
// AP detection fails; callers may resample.
std::pair<WifiScan, FeatureVector> sample_scan(const World& world,
                                               const DeviceProfile& device,
                                               const LocationLabel& place,
                                               Rng& rng, double at_time = 0.0);

// The local-learning loop over the device's coverage: sample, check
// is_new_location, insert with the ground-truth label.
LocalDatabase populate_device(const World& world, const DeviceProfile& device,
                              Rng& rng, double sim_threshold = 0.05);

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentCell {
  std::string id;
  int n = 1;
  int k = 25;
  int p1 = 0;
  double p2 = 0.0;
  std::string weighting = "uniform";  // uniform | oracle | learned
  ClassifierKind classifier = ClassifierKind::kNfm;
  int n_noisy = 0;  // providers forced to p2 while the rest run noiseless
};

struct ExperimentSpec {
  uint64_t seed = 1;
  int runs = 48;
  int queries_per_run = 15;
  int providers = 7;
  int buildings_per_device = 5;
  double accept_threshold = 0.0;  // experiments score the argmax
  double r1 = 0.5, r2 = 0.5;
  double detection_probability = 0.9;
  double rssi_jitter_db = 3.0;
  double sound_noise_rel = 0.08;
  double cell_noise_db = 1.5;
  AreaLevel provider_area_level = AreaLevel::kCity;
  std::array<int, 5> replication{2, 2, 1, 1, 1};
  WorldConfig world;
  std::vector<ExperimentCell> cells;
  int threads = 1;
};

// Parses a spec file; the grid form expands to explicit cells. The
// COLLABLOC_SEED environment variable, when set, overrides the seed.
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);
ExperimentSpec load_experiment_spec(const std::string& path);

struct RunRecord {
  ExperimentCell cell;
  int run = 0;
  double room_hit = 0.0;       // fraction of queries
  double building_hit = 0.0;   // fraction of queries (room hits included)
  double r_iters = 0.0;        // mean collection rounds over answered queries
};

struct ExperimentResults {
  std::vector<RunRecord> rows;
  std::vector<std::string> skipped_cells;
};

void results_to_csv(const ExperimentResults& results, std::ostream& out);
ExperimentResults results_from_csv(std::istream& in);

struct ReportRow {
  ExperimentCell cell;
  int runs = 0;
  double room_acc = 0.0, room_hw = 0.0;
  double building_acc = 0.0, building_hw = 0.0;
  double mean_r = 0.0;
};

std::vector<ReportRow> aggregate(const ExperimentResults& results);
void report_to_csv(const std::vector<ReportRow>& report, std::ostream& out);

// Runs every cell; infeasible cells (n > providers) are skipped, not fatal.
// When `trace` is non-null every request's events are recorded (single
// threaded in that case).
ExperimentResults run_experiment(const ExperimentSpec& spec,
                                 overlay::Trace* trace = nullptr);

// ---------------------------------------------------------------------------
// Metrics and theoretical results

enum class ScoreOutcome { kRoomHit, kBuildingHit, kMiss, kNoAnswer };

// Room hit on an exact pair match, building hit on a building-only match,
// no-answer when nothing was predicted (counted against both accuracies).
ScoreOutcome score(const std::optional<LocationLabel>& predicted,
                   const LocationLabel& truth);

// Requests per Country PM per day: n_R * nreq_R / (7 * n_PMc).
double theoretical_request_load(double n_requesters,
                                double weekly_requests_per_requester,
                                double country_pm_count);

struct WeeklyLoad {
  std::map<std::string, int> per_country_pm;  // requests over the week
  int total = 0;
  double mean_per_pm_per_day = 0.0;
  double max_per_pm_per_day = 0.0;
};

// Uniform requesters over a week, counting which Country PM each request
// enters through.
WeeklyLoad simulate_weekly_load(const overlay::Overlay& overlay,
                                int requesters, int requests_per_week,
                                Rng& rng);

}  // namespace collabloc::sim

#endif  // COLLABLOC_SIM_HPP_
