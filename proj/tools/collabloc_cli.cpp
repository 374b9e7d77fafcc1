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

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "collabloc/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  json j;
  in >> j;
  return j;
}

int cmd_gen_world(const std::string& config_path, const std::string& out_dir) {
  auto config = collabloc::sim::world_config_from_json(read_json_file(config_path));
  const auto world = collabloc::sim::generate_world(config);
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "world.json");
    out << collabloc::sim::world_to_json(world).dump(2) << "\n";
  }
  std::cout << "world: " << world.rooms.size() << " places in "
            << config.buildings << " buildings, " << config.towers
            << " towers\n";
  std::cout << "digest: " << world.digest() << "\n";
  return 0;
}

int cmd_run(const std::string& spec_path, const std::string& out_dir,
            bool with_traces, int threads) {
  auto spec = collabloc::sim::load_experiment_spec(spec_path);
  if (threads > 0) spec.threads = threads;
  fs::create_directories(out_dir);

  collabloc::overlay::Trace trace;
  const auto results = collabloc::sim::run_experiment(
      spec, with_traces ? &trace : nullptr);

  {
    std::ofstream out(fs::path(out_dir) / "results.csv");
    collabloc::sim::results_to_csv(results, out);
  }
  if (with_traces) {
    std::ofstream out(fs::path(out_dir) / "traces.jsonl");
    trace.save_jsonl(out);
  }
  std::cout << "cells: " << spec.cells.size() - results.skipped_cells.size()
            << " run, " << results.skipped_cells.size() << " skipped; rows: "
            << results.rows.size() << "\n";
  return 0;
}

int cmd_report(const std::string& in_dir) {
  std::ifstream in(fs::path(in_dir) / "results.csv");
  if (!in) throw std::runtime_error("no results.csv under " + in_dir);
  const auto results = collabloc::sim::results_from_csv(in);
  const auto report = collabloc::sim::aggregate(results);
  {
    std::ofstream out(fs::path(in_dir) / "report.csv");
    collabloc::sim::report_to_csv(report, out);
  }
  collabloc::sim::report_to_csv(report, std::cout);
  return 0;
}

int cmd_verify(const std::string& in_dir) {
  std::ifstream in(fs::path(in_dir) / "traces.jsonl");
  if (!in) throw std::runtime_error("no traces.jsonl under " + in_dir);
  const auto trace = collabloc::overlay::Trace::load_jsonl(in);
  const auto violations = collabloc::overlay::check_privacy_contract(trace);
  if (violations.empty()) {
    std::cout << "privacy contract holds over " << trace.events.size()
              << " events\n";
    return 0;
  }
  for (const auto& v : violations) std::cerr << "violation: " << v << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collabloc: collaborative room-level localization simulator"};
  app.require_subcommand(1);

  std::string config_path, spec_path, out_dir, in_dir;
  bool with_traces = false;
  int threads = 0;

  auto* gen = app.add_subcommand("gen-world", "generate a synthetic world");
  gen->add_option("--config", config_path, "world config JSON")->required();
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* run = app.add_subcommand("run", "run an experiment spec");
  run->add_option("--spec", spec_path, "experiment spec JSON")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_flag("--traces", with_traces, "export per-request event traces");
  run->add_option("--threads", threads, "worker threads for runs");

  auto* report = app.add_subcommand("report", "aggregate results.csv");
  report->add_option("--in", in_dir, "directory with results.csv")->required();

  auto* verify = app.add_subcommand("verify", "re-check the privacy contract");
  verify->add_option("--in", in_dir, "directory with traces.jsonl")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_world(config_path, out_dir);
    if (run->parsed()) return cmd_run(spec_path, out_dir, with_traces, threads);
    if (report->parsed()) return cmd_report(in_dir);
    if (verify->parsed()) return cmd_verify(in_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
