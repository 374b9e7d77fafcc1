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

#ifndef COLLABLOC_PRIVACY_HPP_
#define COLLABLOC_PRIVACY_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "collabloc/classifier.hpp"
#include "collabloc/rng.hpp"

namespace collabloc::privacy {

using classifier::ClassifierKind;
using classifier::LabelDistribution;
using fingerprint::FeatureVector;
using fingerprint::LocalDatabase;
using fingerprint::LocationLabel;
using fingerprint::WifiScan;

// Region granularity at which a provider anonymizes itself. Doubles as the
// level of a node in the PM hierarchy (Country is the top of the tree).
enum class AreaLevel { kCellTower, kCity, kCounty, kState, kCountry };

// Depth in the PM hierarchy: Country = 0 ... CellTower = 4.
int level_rank(AreaLevel level);
AreaLevel area_level_from_string(const std::string& name);
std::string to_string(AreaLevel level);

// Per-provider privacy knobs: p1 decoy labels, N(0, p2) label noise, top-k
// response truncation, and the anonymization region.
struct PrivacyParams {
  int decoy_count = 0;        // p1
  double noise_stddev = 0.0;  // p2 (standard deviation)
  int top_k = 25;             // k
  AreaLevel area_level = AreaLevel::kCity;
};

// Labels within a provider's area-level region, used to source decoys.
struct LabelPool {
  std::vector<LocationLabel> labels;
};

// Response list: labels with probabilities, highest first, not renormalized
// after truncation.
using RankedLabels = std::vector<std::pair<LocationLabel, double>>;

// Appends decoy_count labels sampled uniformly without replacement from the
// pool (minus labels already present), each with exactly zero mass. A short
// pool degrades gracefully to using all of it.
LabelDistribution add_decoys(LabelDistribution dist, int decoy_count,
                             const LabelPool& pool, Rng& rng);

// Adds independent N(0, noise_stddev) to every label, clamps negatives to
// zero, and renormalizes (uniform if everything clamped to zero). The noise
// draw order is the label order, and a draw is made even when the stddev is
// zero, so runs with different noise levels share the same underlying draws.
LabelDistribution perturb(LabelDistribution dist, double noise_stddev, Rng& rng);

// The k highest-mass labels in decreasing order (ties by label order), all
// labels if the support is smaller. Probabilities are not renormalized.
RankedLabels top_k(const LabelDistribution& dist, int k);

// The provider-side pipeline: two-step classification, decoy enlargement,
// noise perturbation, top-k truncation, in that order. Returns nullopt when
// classification is "NA" (no entry shares an AP with the scan).
std::optional<RankedLabels> generate_location_distribution(
    const LocalDatabase& db, const WifiScan& scan, const FeatureVector& features,
    const PrivacyParams& params, const LabelPool& pool, Rng& rng,
    double r1 = 0.5, double r2 = 0.5,
    ClassifierKind kind = ClassifierKind::kNfm);

// JSON response schema (docs/schemas.md): provider id, NA flag, ordered
// (building, room, probability) triples.
std::string response_to_json(const std::string& provider_id,
                             const std::optional<RankedLabels>& labels);
std::pair<std::string, std::optional<RankedLabels>> response_from_json(
    const std::string& text);

}  // namespace collabloc::privacy

#endif  // COLLABLOC_PRIVACY_HPP_
