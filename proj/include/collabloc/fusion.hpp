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

#ifndef COLLABLOC_FUSION_HPP_
#define COLLABLOC_FUSION_HPP_

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "collabloc/privacy.hpp"

namespace collabloc::fusion {

using classifier::LabelDistribution;
using fingerprint::LocationLabel;
using privacy::RankedLabels;

// Raised when fusion has nothing to work with: every response was NA, or the
// total weight is zero. Distinct from an empty distribution.
struct NoInformationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fusion weight U = U_n * U_t: a reputation-like noise estimate times a
// freshness decay.
struct Utility {
  double noise_component = 1.0;  // U_n in [0, 1]
  double time_component = 1.0;   // U_t in (0, 1]
  double combined() const { return noise_component * time_component; }
};

// One collaborator's contribution: its ranked labels (nullopt = NA) and the
// weight the CTPM assigns it.
struct ProviderResponse {
  std::string provider_id;
  std::optional<RankedLabels> labels;
  Utility utility;
};

// Weighted average over the non-NA responses: mass[l] = sum_i U_i * p_i(l) /
// sum_i U_i, with p_i(l) = 0 when a response does not carry label l, then
// normalized. Throws NoInformationError when all responses are NA or the
// total weight is zero; std::invalid_argument on negative weights.
LabelDistribution weighted_average_fusion(
    const std::vector<ProviderResponse>& responses);

// The argmax label iff its mass strictly exceeds the threshold; ties at the
// maximum yield nullopt (ambiguity is insufficient confidence).
std::optional<LocationLabel> accept_label(const LabelDistribution& dist,
                                          double threshold = 0.5);

// Freshness decay 2^(-age / half_life). Throws on negative age or
// non-positive half-life.
double time_utility(double age, double half_life);

// Exponential moving average: (1 - smoothing) * current + smoothing *
// feedback. All arguments range-checked.
double update_noise_utility(double current, double feedback, double smoothing);

// Feedback signal for a provider after a label was accepted: the probability
// its response assigned to the accepted label, rescaled by its own top-1
// mass into [0, 1]. Zero when the label is absent from the response.
double response_feedback(const RankedLabels& labels,
                         const LocationLabel& accepted);

// Fused result plus collection metadata, serialized per docs/schemas.md.
struct FusionMetadata {
  int responses_used = 0;       // l
  int iterations = 0;           // r
  int providers_contacted = 0;
};

std::string fused_to_json(const LabelDistribution& dist,
                          const FusionMetadata& meta);

}  // namespace collabloc::fusion

#endif  // COLLABLOC_FUSION_HPP_
