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
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "collabloc/sim.hpp"
#include "collabloc/stats.hpp"

namespace collabloc::sim {

using nlohmann::json;

namespace {

std::string format_double(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

void validate_weighting(const std::string& mode) {
  if (mode != "uniform" && mode != "oracle" && mode != "learned")
    throw std::invalid_argument("unknown weighting mode: " + mode);
}

std::string auto_cell_id(const ExperimentCell& cell) {
  std::string id = "n" + std::to_string(cell.n) + "-k" + std::to_string(cell.k) +
                   "-p1_" + std::to_string(cell.p1) + "-p2_" +
                   format_double(cell.p2, "%g") + "-" + cell.weighting + "-" +
                   classifier::to_string(cell.classifier);
  if (cell.n_noisy > 0) id += "-noisy" + std::to_string(cell.n_noisy);
  return id;
}

ExperimentCell cell_from_json(const json& j) {
  ExperimentCell cell;
  if (j.contains("n")) cell.n = j.at("n").get<int>();
  if (j.contains("k")) cell.k = j.at("k").get<int>();
  if (j.contains("p1")) cell.p1 = j.at("p1").get<int>();
  if (j.contains("p2")) cell.p2 = j.at("p2").get<double>();
  if (j.contains("weighting"))
    cell.weighting = j.at("weighting").get<std::string>();
  if (j.contains("classifier"))
    cell.classifier =
        classifier::classifier_from_string(j.at("classifier").get<std::string>());
  if (j.contains("n_noisy")) cell.n_noisy = j.at("n_noisy").get<int>();
  cell.id = j.contains("id") ? j.at("id").get<std::string>() : auto_cell_id(cell);
  validate_weighting(cell.weighting);
  return cell;
}

}  // namespace

ExperimentSpec experiment_spec_from_json(const json& j) {
  ExperimentSpec spec;
  spec.seed = j.at("seed").get<uint64_t>();
  if (j.contains("runs")) spec.runs = j.at("runs").get<int>();
  if (j.contains("queries_per_run"))
    spec.queries_per_run = j.at("queries_per_run").get<int>();
  if (j.contains("providers")) spec.providers = j.at("providers").get<int>();
  if (j.contains("buildings_per_device"))
    spec.buildings_per_device = j.at("buildings_per_device").get<int>();
  if (j.contains("accept_threshold"))
    spec.accept_threshold = j.at("accept_threshold").get<double>();
  if (j.contains("r1")) spec.r1 = j.at("r1").get<double>();
  if (j.contains("r2")) spec.r2 = j.at("r2").get<double>();
  if (j.contains("detection_probability"))
    spec.detection_probability = j.at("detection_probability").get<double>();
  if (j.contains("rssi_jitter_db"))
    spec.rssi_jitter_db = j.at("rssi_jitter_db").get<double>();
  if (j.contains("sound_noise_rel"))
    spec.sound_noise_rel = j.at("sound_noise_rel").get<double>();
  if (j.contains("cell_noise_db"))
    spec.cell_noise_db = j.at("cell_noise_db").get<double>();
  if (j.contains("provider_area_level"))
    spec.provider_area_level =
        privacy::area_level_from_string(j.at("provider_area_level").get<std::string>());
  if (j.contains("threads")) spec.threads = j.at("threads").get<int>();
  if (j.contains("replication")) {
    static const char* names[5] = {"country", "state", "county", "city",
                                   "cell_tower"};
    for (int rank = 0; rank < 5; ++rank)
      if (j.at("replication").contains(names[rank]))
        spec.replication[rank] = j.at("replication").at(names[rank]).get<int>();
  }

  json world = j.contains("world") ? j.at("world") : json::object();
  if (!world.contains("seed")) world["seed"] = spec.seed;
  spec.world = world_config_from_json(world);

  if (const char* env = std::getenv("COLLABLOC_SEED")) {
    spec.seed = std::strtoull(env, nullptr, 10);
    if (!j.contains("world") || !j.at("world").contains("seed"))
      spec.world.seed = spec.seed;
  }

  if (j.contains("cells")) {
    for (const auto& c : j.at("cells")) spec.cells.push_back(cell_from_json(c));
  } else if (j.contains("grid")) {
    const auto& grid = j.at("grid");
    auto ints = [&](const char* key, std::vector<int> fallback) {
      return grid.contains(key) ? grid.at(key).get<std::vector<int>>()
                                : fallback;
    };
    auto doubles = [&](const char* key, std::vector<double> fallback) {
      return grid.contains(key) ? grid.at(key).get<std::vector<double>>()
                                : fallback;
    };
    auto strings = [&](const char* key, std::vector<std::string> fallback) {
      return grid.contains(key) ? grid.at(key).get<std::vector<std::string>>()
                                : fallback;
    };
    for (int n : ints("n", {3}))
      for (int k : ints("k", {25}))
        for (int p1 : ints("p1", {0}))
          for (double p2 : doubles("p2", {0.0}))
            for (const auto& weighting : strings("weighting", {"uniform"}))
              for (const auto& cls : strings("classifier", {"nfm"}))
                for (int n_noisy : ints("n_noisy", {0})) {
                  ExperimentCell cell;
                  cell.n = n;
                  cell.k = k;
                  cell.p1 = p1;
                  cell.p2 = p2;
                  cell.weighting = weighting;
                  validate_weighting(cell.weighting);
                  cell.classifier = classifier::classifier_from_string(cls);
                  cell.n_noisy = n_noisy;
                  cell.id = auto_cell_id(cell);
                  spec.cells.push_back(std::move(cell));
                }
  }
  if (spec.cells.empty())
    throw std::invalid_argument("experiment spec: no cells");
  if (spec.runs < 2)
    throw std::invalid_argument("experiment spec: runs must be >= 2");
  if (spec.queries_per_run < 1 || spec.providers < 1)
    throw std::invalid_argument("experiment spec: bad counts");
  return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec: " + path);
  json j;
  in >> j;
  return experiment_spec_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV

static const char* kResultsHeader =
    "cell_id,n,k,p1,p2,weighting,classifier,run,room_hit,building_hit,r_iters";

void results_to_csv(const ExperimentResults& results, std::ostream& out) {
  out << kResultsHeader << "\n";
  for (const auto& row : results.rows) {
    out << row.cell.id << "," << row.cell.n << "," << row.cell.k << ","
        << row.cell.p1 << "," << format_double(row.cell.p2, "%g") << ","
        << row.cell.weighting << "," << classifier::to_string(row.cell.classifier)
        << "," << row.run << "," << format_double(row.room_hit, "%.6f") << ","
        << format_double(row.building_hit, "%.6f") << ","
        << format_double(row.r_iters, "%.6f") << "\n";
  }
}

ExperimentResults results_from_csv(std::istream& in) {
  ExperimentResults results;
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader)
    throw std::runtime_error("results csv: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 11)
      throw std::runtime_error("results csv: malformed row: " + line);
    RunRecord row;
    row.cell.id = fields[0];
    row.cell.n = std::stoi(fields[1]);
    row.cell.k = std::stoi(fields[2]);
    row.cell.p1 = std::stoi(fields[3]);
    row.cell.p2 = std::stod(fields[4]);
    row.cell.weighting = fields[5];
    row.cell.classifier = classifier::classifier_from_string(fields[6]);
    row.run = std::stoi(fields[7]);
    row.room_hit = std::stod(fields[8]);
    row.building_hit = std::stod(fields[9]);
    row.r_iters = std::stod(fields[10]);
    results.rows.push_back(std::move(row));
  }
  return results;
}

std::vector<ReportRow> aggregate(const ExperimentResults& results) {
  std::vector<ReportRow> report;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::vector<double>> rooms, buildings, iters;
  for (const auto& row : results.rows) {
    if (!index.count(row.cell.id)) {
      index[row.cell.id] = report.size();
      ReportRow r;
      r.cell = row.cell;
      report.push_back(std::move(r));
    }
    rooms[row.cell.id].push_back(row.room_hit);
    buildings[row.cell.id].push_back(row.building_hit);
    iters[row.cell.id].push_back(row.r_iters);
  }
  for (auto& r : report) {
    const auto& room = rooms.at(r.cell.id);
    const auto& building = buildings.at(r.cell.id);
    r.runs = static_cast<int>(room.size());
    r.room_acc = stats::mean(room);
    r.room_hw = stats::half_width_95(room);
    r.building_acc = stats::mean(building);
    r.building_hw = stats::half_width_95(building);
    r.mean_r = stats::mean(iters.at(r.cell.id));
  }
  return report;
}

void report_to_csv(const std::vector<ReportRow>& report, std::ostream& out) {
  out << "cell_id,n,k,p1,p2,weighting,classifier,runs,room_acc,room_hw,"
         "building_acc,building_hw,mean_r\n";
  for (const auto& r : report) {
    out << r.cell.id << "," << r.cell.n << "," << r.cell.k << "," << r.cell.p1
        << "," << format_double(r.cell.p2, "%g") << "," << r.cell.weighting
        << "," << classifier::to_string(r.cell.classifier) << "," << r.runs
        << "," << format_double(r.room_acc, "%.6f") << ","
        << format_double(r.room_hw, "%.6f") << ","
        << format_double(r.building_acc, "%.6f") << ","
        << format_double(r.building_hw, "%.6f") << ","
        << format_double(r.mean_r, "%.6f") << "\n";
  }
}

// ---------------------------------------------------------------------------
// Runner

namespace {

struct ExperimentContext {
  const ExperimentSpec& spec;
  World world;
  std::vector<DeviceProfile> providers;
  DeviceProfile requester;
  std::vector<LocalDatabase> databases;
  std::vector<privacy::LabelPool> pools;
  std::vector<LocationLabel> query_universe;
  overlay::TopologyConfig topology;
};

ExperimentContext make_context(const ExperimentSpec& spec) {
  ExperimentContext ctx{spec,
                        generate_world(spec.world),
                        {},
                        {},
                        {},
                        {},
                        {},
                        {}};
  Rng world_rng(spec.world.seed);

  std::vector<int> building_ids(spec.world.buildings);
  for (int b = 0; b < spec.world.buildings; ++b) building_ids[b] = b;

  std::set<LocationLabel> covered;
  for (int i = 0; i < spec.providers; ++i) {
    DeviceProfile profile;
    profile.id = "P" + std::to_string(i);
    profile.detection_probability = spec.detection_probability;
    profile.rssi_jitter_db = spec.rssi_jitter_db;
    profile.sound_noise_rel = spec.sound_noise_rel;
    profile.cell_noise_db = spec.cell_noise_db;
    profile.area_level = spec.provider_area_level;

    Rng cov_rng = world_rng.derive("coverage", static_cast<uint64_t>(i));
    auto picked = cov_rng.sample_without_replacement(
        building_ids,
        static_cast<size_t>(std::min(spec.buildings_per_device,
                                     spec.world.buildings)));
    std::sort(picked.begin(), picked.end());
    for (const auto& room : ctx.world.rooms) {
      const int b = std::stoi(room.label.building.substr(1));
      if (std::binary_search(picked.begin(), picked.end(), b)) {
        profile.coverage.push_back(room.label);
        covered.insert(room.label);
      }
    }
    if (profile.coverage.empty())
      throw GenerationError("provider has empty coverage: " + profile.id);
    profile.home_tower = ctx.world.room(profile.coverage.front()).tower;
    ctx.providers.push_back(std::move(profile));
  }

  ctx.requester.id = "requester";
  ctx.requester.detection_probability = spec.detection_probability;
  ctx.requester.rssi_jitter_db = spec.rssi_jitter_db;
  ctx.requester.sound_noise_rel = spec.sound_noise_rel;
  ctx.requester.cell_noise_db = spec.cell_noise_db;

  for (int i = 0; i < spec.providers; ++i) {
    Rng learn_rng = world_rng.derive("learn", static_cast<uint64_t>(i));
    ctx.databases.push_back(
        populate_device(ctx.world, ctx.providers[i], learn_rng));
    ctx.pools.push_back(ctx.world.pool_for(ctx.providers[i].home_tower,
                                           ctx.providers[i].area_level));
  }

  ctx.query_universe.assign(covered.begin(), covered.end());
  ctx.topology = world_topology(ctx.world, spec.replication);
  return ctx;
}

RunRecord execute_run(const ExperimentContext& ctx, const ExperimentCell& cell,
                      int run, overlay::Trace* trace) {
  const ExperimentSpec& spec = ctx.spec;
  Rng run_rng = Rng(spec.seed).derive("run", static_cast<uint64_t>(run));

  // Pick this run's collaborators; the noisy subset (when any) runs at the
  // cell's p2 while the rest stay noiseless.
  std::vector<int> all_ids(spec.providers);
  for (int i = 0; i < spec.providers; ++i) all_ids[i] = i;
  Rng pick_rng = run_rng.derive("picks");
  auto picked = pick_rng.sample_without_replacement(
      all_ids, static_cast<size_t>(cell.n));
  std::sort(picked.begin(), picked.end());

  std::set<std::string> noisy;
  if (cell.n_noisy > 0) {
    Rng noisy_rng = run_rng.derive("noisy");
    for (int idx : noisy_rng.sample_without_replacement(
             picked, static_cast<size_t>(std::min(cell.n_noisy, cell.n))))
      noisy.insert(ctx.providers[idx].id);
  }

  auto overlay_net = overlay::Overlay::build(ctx.topology, spec.seed);
  std::map<std::string, int> provider_index;
  for (int idx : picked) {
    const auto& profile = ctx.providers[idx];
    overlay_net.register_provider(profile.id, profile.home_tower,
                                  profile.area_level);
    provider_index[profile.id] = idx;
  }

  int current_query = 0;
  overlay_net.set_provider_query(
      [&](const std::string& provider_id,
          const overlay::RequestPayload& request)
          -> std::optional<privacy::RankedLabels> {
        const int idx = provider_index.at(provider_id);
        const double p2 =
            (cell.n_noisy == 0 || noisy.count(provider_id)) ? cell.p2 : 0.0;
        privacy::PrivacyParams params{cell.p1, p2, cell.k,
                                      ctx.providers[idx].area_level};
        Rng ldg_rng = run_rng.derive("ldg:" + provider_id,
                                     static_cast<uint64_t>(current_query));
        return privacy::generate_location_distribution(
            ctx.databases[idx], request.scan, request.features, params,
            ctx.pools[idx], ldg_rng, spec.r1, spec.r2, cell.classifier);
      });

  std::map<std::string, double> learned_utility;
  for (int idx : picked) learned_utility[ctx.providers[idx].id] = 1.0;

  overlay::RouteOptions options;
  options.collaborators = cell.n;
  options.accept_threshold = spec.accept_threshold;
  if (cell.weighting == "oracle") {
    options.utility_of = [&](const std::string& id) {
      return fusion::Utility{noisy.count(id) ? 0.1 : 1.0, 1.0};
    };
  } else if (cell.weighting == "learned") {
    options.utility_of = [&](const std::string& id) {
      return fusion::Utility{learned_utility.at(id), 1.0};
    };
    options.feedback_hook = [&](const std::string& id, double feedback) {
      learned_utility[id] =
          fusion::update_noise_utility(learned_utility.at(id), feedback, 0.2);
    };
  }

  Rng query_rng = run_rng.derive("queries");
  auto places = query_rng.sample_without_replacement(
      ctx.query_universe, static_cast<size_t>(spec.queries_per_run));

  int room_hits = 0, building_hits = 0, answered = 0;
  long iteration_sum = 0;
  for (const auto& place : places) {
    Rng scan_rng = run_rng.derive("qscan", static_cast<uint64_t>(current_query));
    WifiScan scan;
    FeatureVector features;
    for (int attempt = 0; attempt < 3 && scan.readings.empty(); ++attempt) {
      auto sampled = sample_scan(ctx.world, ctx.requester, place, scan_rng);
      scan = std::move(sampled.first);
      features = std::move(sampled.second);
    }

    std::optional<LocationLabel> predicted;
    if (!scan.readings.empty()) {
      Rng route_rng =
          run_rng.derive("route", static_cast<uint64_t>(current_query));
      const auto result = overlay_net.route_request(
          "requester", {scan, features}, ctx.world.room(place).tower,
          route_rng, options, trace);
      if (result.status == overlay::RouteResult::Status::kDelivered) {
        predicted = result.accepted;
        iteration_sum += result.metadata.iterations;
        ++answered;
      }
    }

    switch (score(predicted, place)) {
      case ScoreOutcome::kRoomHit:
        ++room_hits;
        ++building_hits;
        break;
      case ScoreOutcome::kBuildingHit:
        ++building_hits;
        break;
      default:
        break;
    }
    ++current_query;
  }

  RunRecord record;
  record.cell = cell;
  record.run = run;
  const double q = static_cast<double>(places.size());
  record.room_hit = room_hits / q;
  record.building_hit = building_hits / q;
  record.r_iters = answered > 0 ? static_cast<double>(iteration_sum) / answered
                                : 0.0;
  return record;
}

// Deterministic slot-merge parallelism over run indices.
void parallel_runs(int runs, int threads,
                   const std::function<void(int)>& body) {
  if (threads <= 1) {
    for (int run = 0; run < runs; ++run) body(run);
    return;
  }
  std::vector<std::thread> workers;
  std::atomic<int> next{0};
  for (int t = 0; t < threads; ++t)
    workers.emplace_back([&]() {
      while (true) {
        const int run = next.fetch_add(1);
        if (run >= runs) return;
        body(run);
      }
    });
  for (auto& w : workers) w.join();
}

}  // namespace

ExperimentResults run_experiment(const ExperimentSpec& spec,
                                 overlay::Trace* trace) {
  ExperimentContext ctx = make_context(spec);
  ExperimentResults results;

  const int threads = trace ? 1 : std::max(1, spec.threads);
  for (const auto& cell : spec.cells) {
    if (cell.n > spec.providers || cell.n < 1) {
      std::fprintf(stderr, "skipping infeasible cell %s (n=%d, providers=%d)\n",
                   cell.id.c_str(), cell.n, spec.providers);
      results.skipped_cells.push_back(cell.id);
      continue;
    }
    std::vector<RunRecord> rows(spec.runs);
    parallel_runs(spec.runs, threads, [&](int run) {
      rows[run] = execute_run(ctx, cell, run, trace);
    });
    for (auto& row : rows) results.rows.push_back(std::move(row));
  }
  return results;
}

}  // namespace collabloc::sim
