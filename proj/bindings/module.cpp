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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "collabloc/fusion.hpp"
#include "collabloc/privacy.hpp"
#include "collabloc/sim.hpp"

namespace py = pybind11;

using namespace collabloc;

namespace {

using LabelTuple = std::pair<std::string, std::string>;

classifier::LabelDistribution dist_from_dict(
    const std::map<LabelTuple, double>& mass) {
  classifier::LabelDistribution dist;
  for (const auto& [label, p] : mass)
    dist.mass[{label.first, label.second}] = p;
  return dist;
}

std::map<LabelTuple, double> dist_to_dict(
    const classifier::LabelDistribution& dist) {
  std::map<LabelTuple, double> out;
  for (const auto& [label, p] : dist.mass)
    out[{label.building, label.room}] = p;
  return out;
}

std::vector<std::pair<LabelTuple, double>> ranked_to_list(
    const privacy::RankedLabels& ranked) {
  std::vector<std::pair<LabelTuple, double>> out;
  for (const auto& [label, p] : ranked)
    out.emplace_back(LabelTuple{label.building, label.room}, p);
  return out;
}

privacy::RankedLabels ranked_from_list(
    const std::vector<std::pair<LabelTuple, double>>& list) {
  privacy::RankedLabels out;
  for (const auto& [label, p] : list)
    out.emplace_back(fingerprint::LocationLabel{label.first, label.second}, p);
  return out;
}

}  // namespace

PYBIND11_MODULE(collabloc, m) {
  m.doc() = "Privacy-preserving collaborative room-level localization core";

  py::class_<Rng>(m, "Rng")
      .def(py::init<uint64_t>(), py::arg("seed"))
      .def("uniform", [](Rng& rng) { return rng.uniform(); })
      .def("gaussian", [](Rng& rng, double stddev) { return rng.gaussian(stddev); },
           py::arg("stddev"))
      .def("derive",
           [](const Rng& rng, const std::string& label, uint64_t index) {
             return rng.derive(label, index);
           },
           py::arg("label"), py::arg("index") = 0);

  py::class_<fingerprint::AccessPointReading>(m, "AccessPointReading")
      .def(py::init<std::string, double>(), py::arg("bssid"),
           py::arg("rssi_dbm"))
      .def_readwrite("bssid", &fingerprint::AccessPointReading::bssid)
      .def_readwrite("rssi_dbm", &fingerprint::AccessPointReading::rssi_dbm);

  py::class_<fingerprint::WifiScan>(m, "WifiScan")
      .def(py::init<>())
      .def(py::init([](const std::vector<std::pair<std::string, double>>& aps,
                       double captured_at) {
             fingerprint::WifiScan scan;
             for (const auto& [bssid, rssi] : aps)
               scan.readings.push_back({bssid, rssi});
             scan.captured_at = captured_at;
             return scan;
           }),
           py::arg("readings"), py::arg("captured_at") = 0.0)
      .def_readwrite("readings", &fingerprint::WifiScan::readings)
      .def_readwrite("captured_at", &fingerprint::WifiScan::captured_at);

  py::class_<fingerprint::FeatureVector>(m, "FeatureVector")
      .def(py::init<>())
      .def(py::init([](std::map<std::string, double> numeric,
                       std::map<std::string, std::string> categorical) {
             return fingerprint::FeatureVector{std::move(numeric),
                                               std::move(categorical)};
           }),
           py::arg("numeric") = std::map<std::string, double>{},
           py::arg("categorical") = std::map<std::string, std::string>{})
      .def_readwrite("numeric", &fingerprint::FeatureVector::numeric)
      .def_readwrite("categorical", &fingerprint::FeatureVector::categorical);

  py::class_<fingerprint::Entry>(m, "Entry")
      .def(py::init([](const fingerprint::WifiScan& scan,
                       const fingerprint::FeatureVector& features,
                       const LabelTuple& label, double recorded_at) {
             return fingerprint::Entry{
                 scan, features, {label.first, label.second}, recorded_at};
           }),
           py::arg("scan"), py::arg("features"), py::arg("label"),
           py::arg("recorded_at") = 0.0)
      .def_readwrite("scan", &fingerprint::Entry::scan)
      .def_readwrite("features", &fingerprint::Entry::features)
      .def_property(
          "label",
          [](const fingerprint::Entry& e) {
            return LabelTuple{e.label.building, e.label.room};
          },
          [](fingerprint::Entry& e, const LabelTuple& label) {
            e.label = {label.first, label.second};
          });

  py::class_<fingerprint::LocalDatabase>(m, "LocalDatabase")
      .def(py::init<>())
      .def(py::init([](double sim_threshold) {
             fingerprint::LocalDatabase db;
             db.sim_threshold = sim_threshold;
             return db;
           }),
           py::arg("sim_threshold"))
      .def_readwrite("entries", &fingerprint::LocalDatabase::entries)
      .def_readwrite("sim_threshold", &fingerprint::LocalDatabase::sim_threshold)
      .def("insert",
           [](fingerprint::LocalDatabase& db, const fingerprint::Entry& e) {
             fingerprint::insert_entry(db, e);
           })
      .def("__len__",
           [](const fingerprint::LocalDatabase& db) { return db.entries.size(); })
      .def("to_jsonl",
           [](const fingerprint::LocalDatabase& db) {
             std::ostringstream out;
             fingerprint::save_database_jsonl(db, out);
             return out.str();
           })
      .def_static("from_jsonl",
                  [](const std::string& text, double sim_threshold) {
                    std::istringstream in(text);
                    return fingerprint::load_database_jsonl(in, sim_threshold);
                  },
                  py::arg("text"), py::arg("sim_threshold") = 0.05);

  m.def("cosine_similarity", &fingerprint::cosine_similarity, py::arg("a"),
        py::arg("b"));
  m.def("match_entries", &fingerprint::match_entries, py::arg("db"),
        py::arg("scan"));
  m.def("is_new_location", &fingerprint::is_new_location, py::arg("db"),
        py::arg("scan"), py::arg("features"));

  m.def("build_category_boundaries",
        [](const std::vector<double>& values) {
          return classifier::build_categories("feature", values).boundaries;
        },
        py::arg("values"));
  m.def("nfm_classify",
        [](const std::vector<fingerprint::Entry>& training,
           const fingerprint::FeatureVector& input) {
          return dist_to_dict(classifier::nfm_classify(training, input));
        },
        py::arg("training"), py::arg("input"));
  m.def("mlr_classify",
        [](const std::vector<fingerprint::Entry>& training,
           const fingerprint::FeatureVector& input) {
          return dist_to_dict(classifier::mlr_classify(training, input));
        },
        py::arg("training"), py::arg("input"));
  m.def("two_step_classify",
        [](const fingerprint::LocalDatabase& db,
           const fingerprint::WifiScan& scan,
           const fingerprint::FeatureVector& features, double r1, double r2)
            -> std::optional<std::map<LabelTuple, double>> {
          auto dist = classifier::two_step_classify(db, scan, features, r1, r2);
          if (!dist) return std::nullopt;
          return dist_to_dict(*dist);
        },
        py::arg("db"), py::arg("scan"), py::arg("features"),
        py::arg("r1") = 0.5, py::arg("r2") = 0.5);

  py::class_<privacy::PrivacyParams>(m, "PrivacyParams")
      .def(py::init([](int p1, double p2, int k, const std::string& area_level) {
             return privacy::PrivacyParams{
                 p1, p2, k, privacy::area_level_from_string(area_level)};
           }),
           py::arg("p1") = 0, py::arg("p2") = 0.0, py::arg("k") = 25,
           py::arg("area_level") = "city")
      .def_readwrite("p1", &privacy::PrivacyParams::decoy_count)
      .def_readwrite("p2", &privacy::PrivacyParams::noise_stddev)
      .def_readwrite("k", &privacy::PrivacyParams::top_k);

  m.def("generate_location_distribution",
        [](const fingerprint::LocalDatabase& db,
           const fingerprint::WifiScan& scan,
           const fingerprint::FeatureVector& features,
           const privacy::PrivacyParams& params,
           const std::vector<LabelTuple>& pool, Rng& rng, double r1, double r2)
            -> std::optional<std::vector<std::pair<LabelTuple, double>>> {
          privacy::LabelPool label_pool;
          for (const auto& [building, room] : pool)
            label_pool.labels.push_back({building, room});
          auto ranked = privacy::generate_location_distribution(
              db, scan, features, params, label_pool, rng, r1, r2);
          if (!ranked) return std::nullopt;
          return ranked_to_list(*ranked);
        },
        py::arg("db"), py::arg("scan"), py::arg("features"), py::arg("params"),
        py::arg("pool"), py::arg("rng"), py::arg("r1") = 0.5,
        py::arg("r2") = 0.5);

  m.def("weighted_average_fusion",
        [](const std::vector<std::tuple<
               std::string,
               std::optional<std::vector<std::pair<LabelTuple, double>>>,
               double>>& responses) {
          std::vector<fusion::ProviderResponse> converted;
          for (const auto& [id, labels, weight] : responses) {
            fusion::ProviderResponse r;
            r.provider_id = id;
            if (labels) r.labels = ranked_from_list(*labels);
            r.utility = {weight, 1.0};
            converted.push_back(std::move(r));
          }
          return dist_to_dict(fusion::weighted_average_fusion(converted));
        },
        py::arg("responses"),
        "Each response is (provider_id, labels-or-None, weight).");
  m.def("accept_label",
        [](const std::map<LabelTuple, double>& dist, double threshold)
            -> std::optional<LabelTuple> {
          auto label = fusion::accept_label(dist_from_dict(dist), threshold);
          if (!label) return std::nullopt;
          return LabelTuple{label->building, label->room};
        },
        py::arg("dist"), py::arg("threshold") = 0.5);
  m.def("time_utility", &fusion::time_utility, py::arg("age"),
        py::arg("half_life"));
  m.def("update_noise_utility", &fusion::update_noise_utility,
        py::arg("current"), py::arg("feedback"), py::arg("smoothing"));

  m.def("theoretical_request_load", &sim::theoretical_request_load,
        py::arg("n_requesters"), py::arg("weekly_requests_per_requester"),
        py::arg("country_pm_count"));
  m.def("world_digest",
        [](const std::string& config_json) {
          const auto config = sim::world_config_from_json(
              nlohmann::json::parse(config_json));
          return sim::generate_world(config).digest();
        },
        py::arg("config_json"));

  py::register_exception<fusion::NoInformationError>(m, "NoInformationError");
  py::register_exception<overlay::UnsealError>(m, "UnsealError");
}
