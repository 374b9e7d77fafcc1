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

#ifndef COLLABLOC_CLASSIFIER_HPP_
#define COLLABLOC_CLASSIFIER_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "collabloc/fingerprint.hpp"

namespace collabloc::classifier {

using fingerprint::Entry;
using fingerprint::FeatureVector;
using fingerprint::LocalDatabase;
using fingerprint::LocationLabel;
using fingerprint::WifiScan;

// Probability mass over location labels. Labels are distinct by construction
// (std::map); a normalized distribution sums to 1 within 1e-9.
struct LabelDistribution {
  std::map<LocationLabel, double> mass;

  double total() const;
  bool empty() const { return mass.empty(); }
  std::size_t size() const { return mass.size(); }

  // Divides by total(). A zero total becomes uniform over the support.
  void normalize();
};

// Value categories for one numeric feature. Category i spans
// [boundaries[i-1], boundaries[i]) with open ends at +/-infinity; a boundary
// value belongs to the category above it.
struct CategoryPartition {
  std::string feature;
  std::vector<double> boundaries;  // strictly increasing

  std::size_t category_of(double value) const;
  std::size_t category_count() const { return boundaries.size() + 1; }
};

// Boundaries at the midpoints of adjacent distinct sorted values, so every
// training value gets exactly one category and duplicates share one.
// Throws std::invalid_argument on an empty value list.
CategoryPartition build_categories(std::string feature,
                                   std::vector<double> values);

// Feature-match counting classifier. For each training entry, counts input
// features that agree (numeric: same category; categorical: equal), then
// normalizes the counts into a distribution over the training labels.
// Duplicate labels accumulate their counts; a zero total yields the uniform
// distribution over the distinct training labels.
LabelDistribution nfm_classify(const std::vector<Entry>& training,
                               const FeatureVector& input);

// Distribution proportional to similarity, duplicate labels summed.
LabelDistribution similarity_distribution(
    const std::vector<std::pair<LocationLabel, double>>& matches);

enum class ClassifierKind { kNfm, kMlr };
ClassifierKind classifier_from_string(const std::string& name);
std::string to_string(ClassifierKind kind);

struct MlrConfig {
  double learning_rate = 0.1;
  int max_epochs = 500;
  double tolerance = 1e-6;
};

// Multinomial logistic regression baseline: numeric features standardized,
// categorical features one-hot encoded, softmax-linear model fit by batch
// gradient descent on cross-entropy. Single-label training returns the
// degenerate distribution rather than an error.
LabelDistribution mlr_classify(const std::vector<Entry>& training,
                               const FeatureVector& input,
                               const MlrConfig& config = {});

// The two-step classifier: a similarity-weighted distribution over matched
// entries fused r1/r2 with a feature-match distribution over the same
// entries, then padded with the remaining database labels at zero mass.
// Returns nullopt ("NA") when no entry shares an AP with the scan.
std::optional<LabelDistribution> two_step_classify(
    const LocalDatabase& db, const WifiScan& scan, const FeatureVector& features,
    double r1, double r2, ClassifierKind kind = ClassifierKind::kNfm,
    const MlrConfig& mlr_config = {});

}  // namespace collabloc::classifier

#endif  // COLLABLOC_CLASSIFIER_HPP_
