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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "collabloc/sim.hpp"

namespace collabloc::sim {

using nlohmann::json;

WorldConfig world_config_from_json(const json& j) {
  WorldConfig c;
  if (!j.contains("seed"))
    throw std::invalid_argument("world config: seed is mandatory");
  c.seed = j.at("seed").get<uint64_t>();
  if (j.contains("buildings")) c.buildings = j.at("buildings").get<int>();
  if (j.contains("rooms_min")) c.rooms_min = j.at("rooms_min").get<int>();
  if (j.contains("rooms_max")) c.rooms_max = j.at("rooms_max").get<int>();
  if (j.contains("aps_per_building"))
    c.aps_per_building = j.at("aps_per_building").get<int>();
  if (j.contains("path_loss_exponent"))
    c.path_loss_exponent = j.at("path_loss_exponent").get<double>();
  if (j.contains("reference_power_dbm"))
    c.reference_power_dbm = j.at("reference_power_dbm").get<double>();
  if (j.contains("shadowing_sigma_db"))
    c.shadowing_sigma_db = j.at("shadowing_sigma_db").get<double>();
  if (j.contains("towers")) c.towers = j.at("towers").get<int>();
  if (j.contains("decoy_pool_per_tower"))
    c.decoy_pool_per_tower = j.at("decoy_pool_per_tower").get<int>();
  if (j.contains("building_spacing_m"))
    c.building_spacing_m = j.at("building_spacing_m").get<double>();
  if (j.contains("room_spacing_m"))
    c.room_spacing_m = j.at("room_spacing_m").get<double>();

  if (c.buildings < 1 || c.rooms_min < 1 || c.rooms_max < c.rooms_min ||
      c.aps_per_building < 1 || c.towers < 1 ||
      c.path_loss_exponent <= 0.0 || c.shadowing_sigma_db < 0.0 ||
      c.building_spacing_m <= 0.0 || c.room_spacing_m <= 0.0)
    throw std::invalid_argument("world config: non-positive physical parameter");
  return c;
}

json world_config_to_json(const WorldConfig& c) {
  return json{{"seed", c.seed},
              {"buildings", c.buildings},
              {"rooms_min", c.rooms_min},
              {"rooms_max", c.rooms_max},
              {"aps_per_building", c.aps_per_building},
              {"path_loss_exponent", c.path_loss_exponent},
              {"reference_power_dbm", c.reference_power_dbm},
              {"shadowing_sigma_db", c.shadowing_sigma_db},
              {"towers", c.towers},
              {"decoy_pool_per_tower", c.decoy_pool_per_tower},
              {"building_spacing_m", c.building_spacing_m},
              {"room_spacing_m", c.room_spacing_m}};
}

double path_loss_rssi(double p0_dbm, double gamma, double distance_m) {
  return p0_dbm - 10.0 * gamma * std::log10(std::max(distance_m, 1.0));
}

namespace {

std::string zero_pad(int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*d", width, value);
  return buf;
}

}  // namespace

const Room& World::room(const LocationLabel& label) const {
  auto it = index_.find(label);
  if (it == index_.end())
    throw std::invalid_argument("unknown place: " + to_string(label));
  return rooms[it->second];
}

std::vector<LocationLabel> World::labels() const {
  std::vector<LocationLabel> out;
  out.reserve(rooms.size());
  for (const auto& r : rooms) out.push_back(r.label);
  return out;
}

privacy::LabelPool World::pool_for(const std::string& home_tower,
                                   AreaLevel level) const {
  privacy::LabelPool pool;
  if (level == AreaLevel::kCellTower) {
    pool.labels = tower_pools.at(home_tower);
    return pool;
  }
  // The synthetic world keeps one region chain above the towers, so every
  // coarser level unions all tower pools.
  for (const auto& tower : towers) {
    const auto& p = tower_pools.at(tower);
    pool.labels.insert(pool.labels.end(), p.begin(), p.end());
  }
  return pool;
}

uint64_t World::digest() const {
  const std::string dump = world_to_json(*this).dump();
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : dump) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

World generate_world(const WorldConfig& config) {
  World world;
  world.config = config;
  world.country = "C0";
  world.state = "S0";
  world.county = "CO0";
  world.city = "CI0";
  for (int t = 0; t < config.towers; ++t)
    world.towers.push_back("T" + zero_pad(t, 2));

  Rng rng(config.seed);

  struct ApSite {
    std::string bssid;
    double x, y;
  };
  std::vector<ApSite> aps;

  // Buildings sit on a line far enough apart that their APs never carry
  // across; rooms and APs live inside a small box around the building center.
  for (int b = 0; b < config.buildings; ++b) {
    const double bx = b * config.building_spacing_m;
    Rng ap_rng = rng.derive("aps", b);
    const double box = 4.0 * config.room_spacing_m;
    for (int a = 0; a < config.aps_per_building; ++a)
      aps.push_back({"ap-" + zero_pad(b, 2) + "-" + zero_pad(a, 2),
                     bx + ap_rng.uniform(0.0, box),
                     ap_rng.uniform(0.0, box)});
  }

  int room_counter = 0;
  for (int b = 0; b < config.buildings; ++b) {
    const double bx = b * config.building_spacing_m;
    const int tower_index = b * config.towers / config.buildings;
    const std::string tower = world.towers[tower_index];
    Rng building_rng = rng.derive("building", b);
    const int room_count =
        config.rooms_min +
        static_cast<int>(building_rng.uniform_index(
            static_cast<size_t>(config.rooms_max - config.rooms_min + 1)));

    for (int r = 0; r < room_count; ++r) {
      Room room;
      room.label = {"B" + zero_pad(b, 2), "R" + std::to_string(r)};
      room.x = bx + (r % 2) * 2.0 * config.room_spacing_m +
               building_rng.uniform(0.0, config.room_spacing_m);
      room.y = (r / 2) * 2.0 * config.room_spacing_m +
               building_rng.uniform(0.0, config.room_spacing_m);
      room.tower = tower;
      room.cell_tower_id = tower;
      room.lac = "LAC" + std::to_string(tower_index / 2);
      room.sound_level = building_rng.uniform(200.0, 20000.0);

      Rng shadow_rng = rng.derive("shadow", room_counter);
      for (const auto& ap : aps) {
        const double d = std::hypot(room.x - ap.x, room.y - ap.y);
        double rssi =
            path_loss_rssi(config.reference_power_dbm,
                           config.path_loss_exponent, d) +
            shadow_rng.gaussian(config.shadowing_sigma_db);
        rssi = std::min(rssi, 0.0);
        if (rssi > fingerprint::kMinRssiDbm)
          room.audible.emplace_back(ap.bssid, rssi);
      }
      std::sort(room.audible.begin(), room.audible.end(),
                [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return a.first < b.first;
                });
      if (room.audible.empty())
        throw GenerationError("room hears no AP above -100 dBm: " +
                              to_string(room.label));

      // Cell signal from the assigned tower; towers sit slightly off the
      // building line.
      const double tower_x =
          (tower_index + 0.5) * config.buildings * config.building_spacing_m /
          config.towers;
      const double d_tower = std::hypot(room.x - tower_x, room.y - 250.0);
      room.cell_signal_dbm = std::clamp(
          path_loss_rssi(-30.0, 2.2, d_tower) +
              shadow_rng.gaussian(config.shadowing_sigma_db),
          fingerprint::kMinRssiDbm, fingerprint::kMaxRssiDbm);

      world.index_[room.label] = world.rooms.size();
      world.rooms.push_back(std::move(room));
      ++room_counter;
    }
  }

  // Decoy directories: each tower region lists its real places plus
  // synthetic points of interest.
  for (int t = 0; t < config.towers; ++t) {
    auto& pool = world.tower_pools[world.towers[t]];
    for (const auto& room : world.rooms)
      if (room.tower == world.towers[t]) pool.push_back(room.label);
    for (int i = 0; i < config.decoy_pool_per_tower; ++i)
      pool.push_back(
          {"poi-" + world.towers[t] + "-" + zero_pad(i, 4), "R0"});
  }
  return world;
}

json world_to_json(const World& world) {
  json rooms = json::array();
  for (const auto& r : world.rooms) {
    json audible = json::array();
    for (const auto& [bssid, rssi] : r.audible)
      audible.push_back({{"bssid", bssid}, {"rssi_dbm", rssi}});
    rooms.push_back({{"building", r.label.building},
                     {"room", r.label.room},
                     {"x", r.x},
                     {"y", r.y},
                     {"tower", r.tower},
                     {"audible", std::move(audible)},
                     {"sound_level", r.sound_level},
                     {"cell_signal_dbm", r.cell_signal_dbm},
                     {"cell_tower_id", r.cell_tower_id},
                     {"lac", r.lac}});
  }
  json pools;
  for (const auto& [tower, labels] : world.tower_pools) {
    json list = json::array();
    for (const auto& label : labels)
      list.push_back({{"building", label.building}, {"room", label.room}});
    pools[tower] = std::move(list);
  }
  return json{{"config", world_config_to_json(world.config)},
              {"country", world.country},
              {"state", world.state},
              {"county", world.county},
              {"city", world.city},
              {"towers", world.towers},
              {"rooms", std::move(rooms)},
              {"tower_pools", std::move(pools)}};
}

overlay::TopologyConfig world_topology(const World& world,
                                       const std::array<int, 5>& replication) {
  overlay::RegionNode city{world.city, {}};
  for (const auto& tower : world.towers) city.children.push_back({tower, {}});
  overlay::RegionNode county{world.county, {city}};
  overlay::RegionNode state{world.state, {county}};
  overlay::RegionNode country{world.country, {state}};
  return overlay::TopologyConfig{country, replication};
}

std::pair<WifiScan, FeatureVector> sample_scan(const World& world,
                                               const DeviceProfile& device,
                                               const LocationLabel& place,
                                               Rng& rng, double at_time) {
  const Room& room = world.room(place);
  WifiScan scan;
  scan.captured_at = at_time;
  for (const auto& [bssid, true_rssi] : room.audible) {
    const bool detected = rng.bernoulli(device.detection_probability);
    const double jitter = rng.gaussian(device.rssi_jitter_db);
    if (!detected) continue;
    scan.readings.push_back(
        {bssid, std::clamp(true_rssi + jitter, fingerprint::kMinRssiDbm,
                           fingerprint::kMaxRssiDbm)});
  }
  std::sort(scan.readings.begin(), scan.readings.end(),
            [](const auto& a, const auto& b) {
              if (a.rssi_dbm != b.rssi_dbm) return a.rssi_dbm > b.rssi_dbm;
              return a.bssid < b.bssid;
            });
  if (scan.readings.size() > fingerprint::kMaxApsPerScan)
    scan.readings.resize(fingerprint::kMaxApsPerScan);

  FeatureVector features;
  features.numeric["sound_level"] = std::max(
      1.0, room.sound_level * (1.0 + rng.gaussian(device.sound_noise_rel)));
  features.numeric["cell_signal_dbm"] =
      std::clamp(room.cell_signal_dbm + rng.gaussian(device.cell_noise_db),
                 fingerprint::kMinRssiDbm, fingerprint::kMaxRssiDbm);
  features.categorical["cell_tower_id"] = room.cell_tower_id;
  features.categorical["lac"] = room.lac;
  return {std::move(scan), std::move(features)};
}

LocalDatabase populate_device(const World& world, const DeviceProfile& device,
                              Rng& rng, double sim_threshold) {
  LocalDatabase db;
  db.sim_threshold = sim_threshold;
  for (const auto& place : device.coverage) {
    for (int attempt = 0; attempt < 3; ++attempt) {
      auto [scan, features] = sample_scan(world, device, place, rng);
      if (scan.readings.empty()) continue;  // resample
      if (is_new_location(db, scan, features)) {
        fingerprint::Entry entry{std::move(scan), std::move(features),
                                 world.room(place).label, 0.0};
        insert_entry(db, std::move(entry));
      }
      break;
    }
  }
  return db;
}

ScoreOutcome score(const std::optional<LocationLabel>& predicted,
                   const LocationLabel& truth) {
  if (truth.building.empty() || truth.room.empty())
    throw std::invalid_argument("score: invalid truth label");
  if (!predicted) return ScoreOutcome::kNoAnswer;
  if (*predicted == truth) return ScoreOutcome::kRoomHit;
  if (predicted->building == truth.building) return ScoreOutcome::kBuildingHit;
  return ScoreOutcome::kMiss;
}

double theoretical_request_load(double n_requesters,
                                double weekly_requests_per_requester,
                                double country_pm_count) {
  if (n_requesters < 0 || weekly_requests_per_requester < 0)
    throw std::invalid_argument("theoretical_request_load: negative input");
  if (country_pm_count <= 0)
    throw std::invalid_argument("theoretical_request_load: n_PMc must be > 0");
  return n_requesters * weekly_requests_per_requester /
         (7.0 * country_pm_count);
}

WeeklyLoad simulate_weekly_load(const overlay::Overlay& overlay, int requesters,
                                int requests_per_week, Rng& rng) {
  WeeklyLoad load;
  for (const auto& [id, node] : overlay.nodes())
    if (node.level == AreaLevel::kCountry) load.per_country_pm[id] = 0;
  const auto towers = overlay.tower_names();
  if (towers.empty()) throw std::invalid_argument("overlay has no towers");
  for (int i = 0; i < requesters; ++i) {
    for (int q = 0; q < requests_per_week; ++q) {
      const auto& tower = towers[rng.uniform_index(towers.size())];
      const auto path = overlay.sample_path(tower, rng);
      ++load.per_country_pm[path.front()];
      ++load.total;
    }
  }
  double sum = 0.0;
  for (const auto& [_, count] : load.per_country_pm) {
    const double per_day = count / 7.0;
    sum += per_day;
    load.max_per_pm_per_day = std::max(load.max_per_pm_per_day, per_day);
  }
  if (!load.per_country_pm.empty())
    load.mean_per_pm_per_day = sum / load.per_country_pm.size();
  return load;
}

}  // namespace collabloc::sim
