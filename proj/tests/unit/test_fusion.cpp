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

#include "collabloc/stats.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

using namespace collabloc;
using namespace collabloc::fusion;
using fingerprint::LocationLabel;

namespace {

ProviderResponse response_of(
    const std::string& id,
    const std::vector<std::pair<std::string, double>>& rooms, double weight) {
  ProviderResponse r;
  r.provider_id = id;
  privacy::RankedLabels labels;
  for (const auto& [room, p] : rooms) labels.push_back({{"B", room}, p});
  r.labels = std::move(labels);
  r.utility = {weight, 1.0};
  return r;
}

ProviderResponse na_of(const std::string& id, double weight) {
  return ProviderResponse{id, std::nullopt, {weight, 1.0}};
}

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("single response renormalizes regardless of weight") {
  // A truncated response summing to 0.8.
  const auto fused =
      weighted_average_fusion({response_of("P0", {{"X", 0.6}, {"Y", 0.2}}, 0.37)});
  CHECK(fused.mass.at({"B", "X"}) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(fused.mass.at({"B", "Y"}) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("idempotence on identical responses") {
  const auto a = response_of("P0", {{"X", 0.7}, {"Y", 0.3}}, 1.0);
  const auto b = response_of("P1", {{"X", 0.7}, {"Y", 0.3}}, 0.4);
  const auto fused = weighted_average_fusion({a, b});
  CHECK(fused.mass.at({"B", "X"}) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(fused.mass.at({"B", "Y"}) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("three response golden case") {
  const std::vector<ProviderResponse> responses{
      response_of("P0", {{"X", 0.8}, {"Y", 0.2}}, 1.0),
      response_of("P1", {{"Y", 0.6}, {"Z", 0.4}}, 0.5),
      response_of("P2", {{"X", 0.5}, {"Z", 0.5}}, 0.25)};
  const auto fused = weighted_average_fusion(responses);
  // By hand: total weight 1.75; X = (0.8 + 0.125) / 1.75 = 37/70,
  // Y = (0.2 + 0.3) / 1.75 = 2/7, Z = (0.2 + 0.125) / 1.75 = 13/70.
  CHECK(fused.mass.at({"B", "X"}) == doctest::Approx(37.0 / 70.0).epsilon(1e-9));
  CHECK(fused.mass.at({"B", "Y"}) == doctest::Approx(2.0 / 7.0).epsilon(1e-9));
  CHECK(fused.mass.at({"B", "Z"}) == doctest::Approx(13.0 / 70.0).epsilon(1e-9));
  CHECK(fused.total() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weight scale invariance") {
  const std::vector<ProviderResponse> base{
      response_of("P0", {{"X", 0.8}, {"Y", 0.2}}, 0.9),
      response_of("P1", {{"Y", 0.5}, {"Z", 0.5}}, 0.3)};
  auto scaled = base;
  for (auto& r : scaled) r.utility.noise_component *= 7.5;
  const auto a = weighted_average_fusion(base);
  const auto b = weighted_average_fusion(scaled);
  for (const auto& [label, p] : a.mass)
    CHECK(p == doctest::Approx(b.mass.at(label)).epsilon(1e-9));
}

TEST_CASE("zero weight responses change nothing") {
  const std::vector<ProviderResponse> base{
      response_of("P0", {{"X", 0.8}, {"Y", 0.2}}, 1.0),
      response_of("P1", {{"Y", 0.5}, {"Z", 0.5}}, 0.6)};
  auto extended = base;
  extended.push_back(response_of("P2", {{"Q", 1.0}}, 0.0));
  const auto a = weighted_average_fusion(base);
  const auto b = weighted_average_fusion(extended);
  for (const auto& [label, p] : a.mass)
    CHECK(p == doctest::Approx(b.mass.at(label)).epsilon(1e-12));
  // The zero-weight label joins the support with zero mass.
  CHECK(b.mass.at({"B", "Q"}) == 0.0);
}

TEST_CASE("support is the union of response supports") {
  const auto fused = weighted_average_fusion(
      {response_of("P0", {{"X", 1.0}}, 1.0),
       response_of("P1", {{"Y", 1.0}}, 1.0), na_of("P2", 1.0)});
  CHECK(fused.size() == 2);
  CHECK(fused.total() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("error cases") {
  CHECK_THROWS_AS(weighted_average_fusion({na_of("P0", 1.0), na_of("P1", 0.5)}),
                  NoInformationError);
  CHECK_THROWS_AS(weighted_average_fusion({}), NoInformationError);
  CHECK_THROWS_AS(
      weighted_average_fusion({response_of("P0", {{"X", 1.0}}, 0.0)}),
      NoInformationError);
  CHECK_THROWS_AS(
      weighted_average_fusion({response_of("P0", {{"X", 1.0}}, -0.5)}),
      std::invalid_argument);
}

TEST_CASE("accept_label") {
  classifier::LabelDistribution dist;
  SUBCASE("clear majority") {
    dist.mass[{"B", "A"}] = 0.9;
    dist.mass[{"B", "C"}] = 0.1;
    CHECK(accept_label(dist) == LocationLabel{"B", "A"});
  }
  SUBCASE("below threshold") {
    dist.mass[{"B", "A"}] = 0.4;
    dist.mass[{"B", "C"}] = 0.35;
    dist.mass[{"B", "D"}] = 0.25;
    CHECK_FALSE(accept_label(dist, 0.5));
    CHECK(accept_label(dist, 0.3) == LocationLabel{"B", "A"});
  }
  SUBCASE("uniform over four labels") {
    for (int i = 0; i < 4; ++i) dist.mass[{"B", "R" + std::to_string(i)}] = 0.25;
    CHECK_FALSE(accept_label(dist, 0.5));
  }
  SUBCASE("argmax ties yield nothing even above threshold") {
    dist.mass[{"B", "A"}] = 0.5;
    dist.mass[{"B", "C"}] = 0.5;
    CHECK_FALSE(accept_label(dist, 0.2));
  }
  SUBCASE("never returns a label at or below the threshold") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
      classifier::LabelDistribution random_dist;
      const int size = 1 + static_cast<int>(rng.uniform_index(6));
      for (int i = 0; i < size; ++i)
        random_dist.mass[{"B", "R" + std::to_string(i)}] = rng.uniform();
      random_dist.normalize();
      const double threshold = rng.uniform();
      const auto label = accept_label(random_dist, threshold);
      if (label) CHECK(random_dist.mass.at(*label) > threshold);
    }
  }
}

TEST_CASE("time_utility") {
  CHECK(time_utility(0.0, 30.0) == 1.0);
  CHECK(time_utility(30.0, 30.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(time_utility(60.0, 30.0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(time_utility(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(time_utility(-1.0, 30.0), std::invalid_argument);
}

TEST_CASE("update_noise_utility") {
  CHECK(update_noise_utility(0.6, 0.6, 0.2) == doctest::Approx(0.6));
  CHECK(update_noise_utility(1.0, 0.0, 0.5) == doctest::Approx(0.5));

  double u = 1.0;
  for (int i = 0; i < 10; ++i) u = update_noise_utility(u, 0.0, 0.3);
  // Closed form: 0.7^10.
  CHECK(u == doctest::Approx(0.028247524899999984).epsilon(1e-12));

  CHECK_THROWS_AS(update_noise_utility(1.2, 0.5, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(update_noise_utility(0.5, -0.1, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(update_noise_utility(0.5, 0.5, 1.0), std::invalid_argument);
}

TEST_CASE("response_feedback") {
  privacy::RankedLabels labels{{{"B", "X"}, 0.5}, {{"B", "Y"}, 0.25}};
  CHECK(response_feedback(labels, {"B", "X"}) == doctest::Approx(1.0));
  CHECK(response_feedback(labels, {"B", "Y"}) == doctest::Approx(0.5));
  CHECK(response_feedback(labels, {"B", "Z"}) == 0.0);
  CHECK(response_feedback({}, {"B", "X"}) == 0.0);
}

TEST_CASE("downweighting noisy responses helps accuracy") {
  // Seven providers answer; the noisy ones carry p2-corrupted distributions.
  // Giving them weight 0.1 must not do worse than uniform weighting.
  const LocationLabel truth{"B", "T"};
  const int trials = 48;
  for (int n_noisy = 2; n_noisy <= 5; ++n_noisy) {
    int weighted_hits = 0, uniform_hits = 0;
    for (int t = 0; t < trials; ++t) {
      Rng rng = Rng(4242).derive("trial", t * 10 + n_noisy);
      classifier::LabelDistribution clean;
      clean.mass[truth] = 0.6;
      for (int i = 0; i < 11; ++i)
        clean.mass[{"B", "F" + std::to_string(i)}] = 0.4 / 11;

      std::vector<ProviderResponse> weighted, uniform;
      for (int p = 0; p < 7; ++p) {
        const bool noisy = p < n_noisy;
        auto dist = noisy ? privacy::perturb(clean, 0.8, rng) : clean;
        privacy::RankedLabels labels(dist.mass.begin(), dist.mass.end());
        ProviderResponse r{"P" + std::to_string(p), labels, {1.0, 1.0}};
        uniform.push_back(r);
        r.utility.noise_component = noisy ? 0.1 : 1.0;
        weighted.push_back(std::move(r));
      }
      const auto w = accept_label(weighted_average_fusion(weighted), 0.5);
      const auto u = accept_label(weighted_average_fusion(uniform), 0.5);
      weighted_hits += w && *w == truth;
      uniform_hits += u && *u == truth;
    }
    CHECK(weighted_hits >= uniform_hits);
  }
}

TEST_CASE("fused metadata serialization") {
  classifier::LabelDistribution dist;
  dist.mass[{"B0", "R1"}] = 1.0;
  const auto text = fused_to_json(dist, {3, 2, 6});
  const auto j = nlohmann::json::parse(text);
  CHECK(j.at("responses_used") == 3);
  CHECK(j.at("iterations") == 2);
  CHECK(j.at("providers_contacted") == 6);
  CHECK(j.at("labels").size() == 1);
}

}  // TEST_SUITE
