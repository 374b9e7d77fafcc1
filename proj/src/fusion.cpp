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

#include "collabloc/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace collabloc::fusion {

using nlohmann::json;

LabelDistribution weighted_average_fusion(
    const std::vector<ProviderResponse>& responses) {
  double total_weight = 0.0;
  LabelDistribution fused;
  for (const auto& response : responses) {
    const double weight = response.utility.combined();
    if (weight < 0.0)
      throw std::invalid_argument("fusion: negative utility weight");
    if (!response.labels) continue;
    total_weight += weight;
    for (const auto& [label, p] : *response.labels)
      fused.mass[label] += weight * p;
  }
  if (fused.mass.empty())
    throw NoInformationError("fusion: all responses were NA");
  if (total_weight <= 0.0)
    throw NoInformationError("fusion: zero total weight");
  for (auto& [_, p] : fused.mass) p /= total_weight;
  fused.normalize();
  return fused;
}

std::optional<LocationLabel> accept_label(const LabelDistribution& dist,
                                          double threshold) {
  if (dist.empty()) return std::nullopt;
  const LocationLabel* best = nullptr;
  double best_mass = -1.0;
  bool tied = false;
  for (const auto& [label, p] : dist.mass) {
    if (p > best_mass) {
      best_mass = p;
      best = &label;
      tied = false;
    } else if (p == best_mass) {
      tied = true;
    }
  }
  if (tied || best_mass <= threshold) return std::nullopt;
  return *best;
}

double time_utility(double age, double half_life) {
  if (half_life <= 0.0)
    throw std::invalid_argument("time_utility: half_life must be > 0");
  if (age < 0.0) throw std::invalid_argument("time_utility: negative age");
  return std::exp2(-age / half_life);
}

double update_noise_utility(double current, double feedback, double smoothing) {
  if (current < 0.0 || current > 1.0)
    throw std::invalid_argument("update_noise_utility: current out of [0,1]");
  if (feedback < 0.0 || feedback > 1.0)
    throw std::invalid_argument("update_noise_utility: feedback out of [0,1]");
  if (smoothing <= 0.0 || smoothing >= 1.0)
    throw std::invalid_argument("update_noise_utility: smoothing out of (0,1)");
  return (1.0 - smoothing) * current + smoothing * feedback;
}

double response_feedback(const RankedLabels& labels,
                         const LocationLabel& accepted) {
  if (labels.empty()) return 0.0;
  const double top1 = labels.front().second;
  if (top1 <= 0.0) return 0.0;
  for (const auto& [label, p] : labels)
    if (label == accepted) return std::clamp(p / top1, 0.0, 1.0);
  return 0.0;
}

std::string fused_to_json(const LabelDistribution& dist,
                          const FusionMetadata& meta) {
  json list = json::array();
  for (const auto& [label, p] : dist.mass)
    list.push_back({{"building", label.building},
                    {"room", label.room},
                    {"probability", p}});
  const json j{{"schema_version", 1},
               {"labels", std::move(list)},
               {"responses_used", meta.responses_used},
               {"iterations", meta.iterations},
               {"providers_contacted", meta.providers_contacted}};
  return j.dump();
}

}  // namespace collabloc::fusion
