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

#include "collabloc/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace collabloc::classifier {

double LabelDistribution::total() const {
  double s = 0.0;
  for (const auto& [_, p] : mass) s += p;
  return s;
}

void LabelDistribution::normalize() {
  if (mass.empty()) return;
  const double s = total();
  if (s <= 0.0) {
    const double u = 1.0 / static_cast<double>(mass.size());
    for (auto& [_, p] : mass) p = u;
    return;
  }
  for (auto& [_, p] : mass) p /= s;
}

std::size_t CategoryPartition::category_of(double value) const {
  return static_cast<std::size_t>(
      std::upper_bound(boundaries.begin(), boundaries.end(), value) -
      boundaries.begin());
}

CategoryPartition build_categories(std::string feature,
                                   std::vector<double> values) {
  if (values.empty())
    throw std::invalid_argument("build_categories: empty value list");
  for (double v : values)
    if (!std::isfinite(v))
      throw std::invalid_argument("build_categories: non-finite value");
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  CategoryPartition part{std::move(feature), {}};
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    part.boundaries.push_back((values[i] + values[i + 1]) / 2.0);
  return part;
}

LabelDistribution nfm_classify(const std::vector<Entry>& training,
                               const FeatureVector& input) {
  if (training.empty())
    throw std::invalid_argument("nfm_classify: empty training set");
  for (const auto& e : training)
    if (!fingerprint::schema_matches(e.features, input))
      throw std::invalid_argument("nfm_classify: feature schema mismatch");

  // One partition per numeric feature, built from the training column.
  std::map<std::string, CategoryPartition> partitions;
  for (const auto& [name, _] : input.numeric) {
    std::vector<double> column;
    column.reserve(training.size());
    for (const auto& e : training) column.push_back(e.features.numeric.at(name));
    partitions.emplace(name, build_categories(name, std::move(column)));
  }

  std::vector<int> counts(training.size(), 0);
  for (std::size_t i = 0; i < training.size(); ++i) {
    const auto& entry = training[i];
    for (const auto& [name, value] : input.numeric) {
      const auto& part = partitions.at(name);
      if (part.category_of(value) ==
          part.category_of(entry.features.numeric.at(name)))
        ++counts[i];
    }
    for (const auto& [name, value] : input.categorical)
      if (entry.features.categorical.at(name) == value) ++counts[i];
  }

  long total = 0;
  for (int c : counts) total += c;

  LabelDistribution dist;
  if (total == 0) {
    for (const auto& e : training) dist.mass[e.label] = 1.0;
    dist.normalize();
    return dist;
  }
  for (std::size_t i = 0; i < training.size(); ++i)
    dist.mass[training[i].label] += static_cast<double>(counts[i]);
  dist.normalize();
  return dist;
}

LabelDistribution similarity_distribution(
    const std::vector<std::pair<LocationLabel, double>>& matches) {
  if (matches.empty())
    throw std::invalid_argument("similarity_distribution: no matches");
  LabelDistribution dist;
  for (const auto& [label, sim] : matches) {
    if (sim <= 0.0)
      throw std::invalid_argument("similarity_distribution: non-positive sim");
    dist.mass[label] += sim;
  }
  dist.normalize();
  return dist;
}

ClassifierKind classifier_from_string(const std::string& name) {
  if (name == "nfm") return ClassifierKind::kNfm;
  if (name == "mlr") return ClassifierKind::kMlr;
  throw std::invalid_argument("unknown classifier: " + name);
}

std::string to_string(ClassifierKind kind) {
  return kind == ClassifierKind::kNfm ? "nfm" : "mlr";
}

namespace {

// Design-matrix encoding shared by fit and query: standardized numeric
// columns followed by one-hot blocks for each categorical feature, plus a
// bias term handled separately.
struct MlrEncoder {
  struct NumericColumn {
    std::string name;
    double mean = 0.0;
    double stddev = 1.0;
  };
  std::vector<NumericColumn> numeric;
  std::vector<std::pair<std::string, std::vector<std::string>>> categorical;
  std::size_t dim = 0;

  explicit MlrEncoder(const std::vector<Entry>& training) {
    const auto& schema = training.front().features;
    for (const auto& [name, _] : schema.numeric) {
      NumericColumn col{name, 0.0, 1.0};
      double s = 0.0;
      for (const auto& e : training) s += e.features.numeric.at(name);
      col.mean = s / static_cast<double>(training.size());
      double ss = 0.0;
      for (const auto& e : training) {
        const double d = e.features.numeric.at(name) - col.mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / static_cast<double>(training.size()));
      col.stddev = sd > 0.0 ? sd : 1.0;
      numeric.push_back(std::move(col));
    }
    for (const auto& [name, _] : schema.categorical) {
      std::set<std::string> values;
      for (const auto& e : training) values.insert(e.features.categorical.at(name));
      categorical.emplace_back(name,
                               std::vector<std::string>(values.begin(), values.end()));
    }
    dim = numeric.size();
    for (const auto& [_, values] : categorical) dim += values.size();
  }

  std::vector<double> encode(const FeatureVector& f) const {
    std::vector<double> x;
    x.reserve(dim);
    for (const auto& col : numeric)
      x.push_back((f.numeric.at(col.name) - col.mean) / col.stddev);
    for (const auto& [name, values] : categorical) {
      const std::string& v = f.categorical.at(name);
      for (const auto& candidate : values)
        x.push_back(candidate == v ? 1.0 : 0.0);
    }
    return x;
  }
};

std::vector<double> softmax(const std::vector<double>& scores) {
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    p[k] = std::exp(scores[k] - m);
    z += p[k];
  }
  for (auto& v : p) v /= z;
  return p;
}

}  // namespace

LabelDistribution mlr_classify(const std::vector<Entry>& training,
                               const FeatureVector& input,
                               const MlrConfig& config) {
  if (training.empty())
    throw std::invalid_argument("mlr_classify: empty training set");
  for (const auto& e : training)
    if (!fingerprint::schema_matches(e.features, input))
      throw std::invalid_argument("mlr_classify: feature schema mismatch");

  std::set<LocationLabel> label_set;
  for (const auto& e : training) label_set.insert(e.label);
  const std::vector<LocationLabel> labels(label_set.begin(), label_set.end());
  if (labels.size() == 1) {
    LabelDistribution dist;
    dist.mass[labels.front()] = 1.0;
    return dist;
  }

  const MlrEncoder encoder(training);
  const std::size_t m = training.size();
  const std::size_t d = encoder.dim;
  const std::size_t num_classes = labels.size();

  std::vector<std::vector<double>> x(m);
  std::vector<std::size_t> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    x[i] = encoder.encode(training[i].features);
    y[i] = static_cast<std::size_t>(
        std::lower_bound(labels.begin(), labels.end(), training[i].label) -
        labels.begin());
  }

  // weights[k] holds d coefficients plus a trailing bias.
  std::vector<std::vector<double>> weights(num_classes,
                                           std::vector<double>(d + 1, 0.0));
  auto scores_for = [&](const std::vector<double>& xi) {
    std::vector<double> s(num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) {
      double acc = weights[k][d];
      for (std::size_t j = 0; j < d; ++j) acc += weights[k][j] * xi[j];
      s[k] = acc;
    }
    return s;
  };

  double prev_loss = 1e300;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::vector<std::vector<double>> grad(num_classes,
                                          std::vector<double>(d + 1, 0.0));
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto p = softmax(scores_for(x[i]));
      loss -= std::log(std::max(p[y[i]], 1e-300));
      for (std::size_t k = 0; k < num_classes; ++k) {
        const double err = p[k] - (k == y[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < d; ++j) grad[k][j] += err * x[i][j];
        grad[k][d] += err;
      }
    }
    loss /= static_cast<double>(m);
    const double scale = config.learning_rate / static_cast<double>(m);
    for (std::size_t k = 0; k < num_classes; ++k)
      for (std::size_t j = 0; j <= d; ++j) weights[k][j] -= scale * grad[k][j];
    if (std::abs(prev_loss - loss) < config.tolerance) break;
    prev_loss = loss;
  }

  const auto p = softmax(scores_for(encoder.encode(input)));
  LabelDistribution dist;
  for (std::size_t k = 0; k < num_classes; ++k) dist.mass[labels[k]] = p[k];
  dist.normalize();
  return dist;
}

std::optional<LabelDistribution> two_step_classify(
    const LocalDatabase& db, const WifiScan& scan, const FeatureVector& features,
    double r1, double r2, ClassifierKind kind, const MlrConfig& mlr_config) {
  if (r1 < 0.0 || r2 < 0.0 || std::abs(r1 + r2 - 1.0) > 1e-9)
    throw std::invalid_argument("two_step_classify: weights must be >= 0 and sum to 1");

  const auto matches = fingerprint::match_entries(db, scan);
  if (matches.empty()) return std::nullopt;

  std::vector<std::pair<LocationLabel, double>> labeled;
  std::vector<Entry> matched_entries;
  labeled.reserve(matches.size());
  matched_entries.reserve(matches.size());
  for (const auto& [index, sim] : matches) {
    labeled.emplace_back(db.entries[index].label, sim);
    matched_entries.push_back(db.entries[index]);
  }

  const LabelDistribution s1 = similarity_distribution(labeled);
  const LabelDistribution s2 =
      kind == ClassifierKind::kNfm
          ? nfm_classify(matched_entries, features)
          : mlr_classify(matched_entries, features, mlr_config);

  LabelDistribution fused;
  for (const auto& [label, p] : s1.mass) fused.mass[label] += r1 * p;
  for (const auto& [label, p] : s2.mass) fused.mass[label] += r2 * p;

  // Remaining database labels join with zero mass.
  for (const auto& label : fingerprint::distinct_labels(db))
    fused.mass.emplace(label, 0.0);

  fused.normalize();
  return fused;
}

}  // namespace collabloc::classifier
