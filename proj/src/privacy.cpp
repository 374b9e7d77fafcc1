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

#include "collabloc/privacy.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace collabloc::privacy {

using nlohmann::json;

int level_rank(AreaLevel level) {
  switch (level) {
    case AreaLevel::kCountry: return 0;
    case AreaLevel::kState: return 1;
    case AreaLevel::kCounty: return 2;
    case AreaLevel::kCity: return 3;
    case AreaLevel::kCellTower: return 4;
  }
  throw std::invalid_argument("level_rank: bad level");
}

AreaLevel area_level_from_string(const std::string& name) {
  if (name == "cell_tower") return AreaLevel::kCellTower;
  if (name == "city") return AreaLevel::kCity;
  if (name == "county") return AreaLevel::kCounty;
  if (name == "state") return AreaLevel::kState;
  if (name == "country") return AreaLevel::kCountry;
  throw std::invalid_argument("unknown area level: " + name);
}

std::string to_string(AreaLevel level) {
  switch (level) {
    case AreaLevel::kCellTower: return "cell_tower";
    case AreaLevel::kCity: return "city";
    case AreaLevel::kCounty: return "county";
    case AreaLevel::kState: return "state";
    case AreaLevel::kCountry: return "country";
  }
  throw std::invalid_argument("to_string: bad level");
}

LabelDistribution add_decoys(LabelDistribution dist, int decoy_count,
                             const LabelPool& pool, Rng& rng) {
  if (decoy_count < 0)
    throw std::invalid_argument("add_decoys: negative decoy count");
  if (decoy_count == 0) return dist;

  std::vector<LocationLabel> candidates;
  candidates.reserve(pool.labels.size());
  for (const auto& label : pool.labels)
    if (!dist.mass.count(label)) candidates.push_back(label);

  const auto picked = rng.sample_without_replacement(
      std::move(candidates), static_cast<size_t>(decoy_count));
  for (const auto& label : picked) dist.mass.emplace(label, 0.0);
  return dist;
}

LabelDistribution perturb(LabelDistribution dist, double noise_stddev,
                          Rng& rng) {
  if (dist.empty()) throw std::invalid_argument("perturb: empty distribution");
  if (noise_stddev < 0.0)
    throw std::invalid_argument("perturb: negative noise stddev");
  for (auto& [_, p] : dist.mass) {
    p += rng.gaussian(noise_stddev);
    if (p < 0.0) p = 0.0;  // the "scale" step
  }
  dist.normalize();
  return dist;
}

RankedLabels top_k(const LabelDistribution& dist, int k) {
  if (k < 1) throw std::invalid_argument("top_k: k must be >= 1");
  RankedLabels ranked(dist.mass.begin(), dist.mass.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > static_cast<size_t>(k)) ranked.resize(k);
  return ranked;
}

std::optional<RankedLabels> generate_location_distribution(
    const LocalDatabase& db, const WifiScan& scan, const FeatureVector& features,
    const PrivacyParams& params, const LabelPool& pool, Rng& rng, double r1,
    double r2, ClassifierKind kind) {
  auto dist = classifier::two_step_classify(db, scan, features, r1, r2, kind);
  if (!dist) return std::nullopt;
  auto enlarged = add_decoys(std::move(*dist), params.decoy_count, pool, rng);
  auto noisy = perturb(std::move(enlarged), params.noise_stddev, rng);
  return top_k(noisy, params.top_k);
}

std::string response_to_json(const std::string& provider_id,
                             const std::optional<RankedLabels>& labels) {
  json j{{"schema_version", 1}, {"provider_id", provider_id}, {"na", !labels}};
  json list = json::array();
  if (labels)
    for (const auto& [label, p] : *labels)
      list.push_back({{"building", label.building},
                      {"room", label.room},
                      {"probability", p}});
  j["labels"] = std::move(list);
  return j.dump();
}

std::pair<std::string, std::optional<RankedLabels>> response_from_json(
    const std::string& text) {
  const json j = json::parse(text);
  const auto provider_id = j.at("provider_id").get<std::string>();
  if (j.at("na").get<bool>()) return {provider_id, std::nullopt};
  RankedLabels labels;
  for (const auto& item : j.at("labels"))
    labels.emplace_back(
        LocationLabel{item.at("building").get<std::string>(),
                      item.at("room").get<std::string>()},
        item.at("probability").get<double>());
  return {provider_id, std::move(labels)};
}

}  // namespace collabloc::privacy
