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

#include "collabloc/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"

using namespace collabloc;
using namespace collabloc::overlay;
using nlohmann::json;
using testutil::features_of;
using testutil::scan_of;

namespace {

// country C / state S / county CO / cities CI0 (3 towers), CI1 (2 towers).
TopologyConfig two_city_topology(std::array<int, 5> replication = {1, 1, 1, 1,
                                                                   1}) {
  RegionNode ci0{"CI0", {{"T0", {}}, {"T1", {}}, {"T2", {}}}};
  RegionNode ci1{"CI1", {{"T3", {}}, {"T4", {}}}};
  RegionNode county{"CO", {ci0, ci1}};
  RegionNode state{"S", {county}};
  RegionNode country{"C", {state}};
  return TopologyConfig{country, replication};
}

RequestPayload sample_payload() {
  return RequestPayload{scan_of({{"home-ap", -48.0}}),
                        features_of(500.0, -70.0, "T0", "L0")};
}

// Installs three providers that answer with fixed labels and one that is
// always NA.
void install_providers(Overlay& overlay) {
  overlay.set_provider_query(
      [](const std::string& id,
         const RequestPayload&) -> std::optional<RankedLabels> {
        if (id == "NA") return std::nullopt;
        RankedLabels labels{{{"B0", "R0"}, 0.6}, {{"B0", "R" + id}, 0.4}};
        return labels;
      });
}

}  // namespace

TEST_SUITE("overlay") {

TEST_CASE("hierarchy node counts") {
  SUBCASE("single replicas over a 2-tower chain") {
    RegionNode city{"CI", {{"T0", {}}, {"T1", {}}}};
    RegionNode county{"CO", {city}};
    RegionNode state{"S", {county}};
    RegionNode country{"C", {state}};
    const auto overlay =
        Overlay::build(TopologyConfig{country, {1, 1, 1, 1, 1}}, 1);
    CHECK(overlay.node_count() == 6);
  }
  SUBCASE("replication multiplies per level") {
    RegionNode city{"CI", {{"T0", {}}, {"T1", {}}}};
    RegionNode county{"CO", {city}};
    RegionNode state{"S", {county}};
    RegionNode country{"C", {state}};
    const auto overlay =
        Overlay::build(TopologyConfig{country, {4, 3, 2, 1, 1}}, 1);
    // 4 + 3 + 2 + 1 + 2 towers x 1.
    CHECK(overlay.node_count() == 12);
  }
  SUBCASE("bottom-heavy replication is accepted") {
    const auto overlay = Overlay::build(two_city_topology({1, 1, 1, 2, 3}), 1);
    CHECK(overlay.node_count() == 1 + 1 + 1 + 2 * 2 + 5 * 3);
  }
  SUBCASE("malformed trees are rejected") {
    // Tower level with children.
    RegionNode bad_tower{"T0", {{"X", {}}}};
    RegionNode city{"CI", {bad_tower}};
    RegionNode county{"CO", {city}};
    RegionNode state{"S", {county}};
    RegionNode country{"C", {state}};
    CHECK_THROWS_AS(Overlay::build(TopologyConfig{country, {1, 1, 1, 1, 1}}, 1),
                    std::invalid_argument);
    // Chain that stops above the tower level.
    RegionNode shallow_country{"C", {RegionNode{"S", {RegionNode{"CO", {}}}}}};
    CHECK_THROWS_AS(
        Overlay::build(TopologyConfig{shallow_country, {1, 1, 1, 1, 1}}, 1),
        std::invalid_argument);
  }
}

TEST_CASE("topology json round trip") {
  const auto config = two_city_topology({3, 2, 2, 1, 1});
  const auto parsed = parse_topology_json(topology_to_json(config));
  CHECK(parsed.replication == config.replication);
  const auto a = Overlay::build(config, 5);
  const auto b = Overlay::build(parsed, 5);
  CHECK(a.node_count() == b.node_count());
  CHECK(a.tower_names() == b.tower_names());
}

TEST_CASE("provider registration by area level") {
  auto overlay = Overlay::build(two_city_topology(), 1);

  SUBCASE("cell tower level touches one repository") {
    overlay.register_provider("P", "T1", AreaLevel::kCellTower);
    CHECK(overlay.towers_listing("P") == std::vector<std::string>{"T1"});
  }
  SUBCASE("city level covers the city's towers") {
    overlay.register_provider("P", "T1", AreaLevel::kCity);
    CHECK(overlay.towers_listing("P") ==
          std::vector<std::string>({"T0", "T1", "T2"}));
  }
  SUBCASE("a provider in the other city stays there") {
    overlay.register_provider("P", "T4", AreaLevel::kCity);
    CHECK(overlay.towers_listing("P") == std::vector<std::string>({"T3", "T4"}));
  }
  SUBCASE("country level covers everything") {
    overlay.register_provider("P", "T2", AreaLevel::kCountry);
    CHECK(overlay.towers_listing("P") ==
          std::vector<std::string>({"T0", "T1", "T2", "T3", "T4"}));
  }
  SUBCASE("unknown tower is rejected") {
    CHECK_THROWS_AS(overlay.register_provider("P", "T9", AreaLevel::kCity),
                    std::invalid_argument);
  }
  SUBCASE("replicas share one repository view") {
    auto replicated = Overlay::build(two_city_topology({2, 2, 2, 2, 2}), 1);
    replicated.register_provider("P", "T0", AreaLevel::kCity);
    for (const auto& tower : {"T0", "T1", "T2"})
      for (const auto& ctpm : replicated.ctpms_of_tower(tower)) {
        const auto& repo = replicated.nodes().at(ctpm).repository;
        CHECK(std::count(repo.begin(), repo.end(), "P") == 1);
      }
  }
}

TEST_CASE("sealed boxes") {
  Rng rng(31);
  const auto pair = make_request_keypair("req-test", rng);

  SUBCASE("round trip") {
    const auto blob = seal("the payload", pair.pub);
    CHECK(unseal(blob, pair.prv) == "the payload");
  }
  SUBCASE("wrong key fails") {
    const auto blob = seal("secret", pair.pub);
    const auto other = make_request_keypair("req-other", rng);
    CHECK_THROWS_AS(unseal(blob, other.prv), UnsealError);
  }
  SUBCASE("five hop onion opens in order only") {
    std::vector<OpenerKey> openers;
    std::vector<SealerKey> sealers;
    for (int i = 0; i < 5; ++i) {
      openers.push_back({"hop" + std::to_string(i), rng.next_u64()});
      sealers.push_back(sealer_of(openers.back()));
    }
    auto blob = seal_onion("inner payload", sealers);
    // Wrong order: hop 2 cannot open the outermost layer.
    CHECK_THROWS_AS(unseal(blob, openers[2]), UnsealError);
    for (int i = 0; i < 5; ++i) {
      const auto layer = json::parse(unseal(blob, openers[i]));
      if (i < 4) {
        CHECK(layer.at("to").get<std::string>() == sealers[i + 1].id);
        blob = layer.at("body").get<std::string>();
      } else {
        CHECK(layer.at("payload").get<std::string>() == "inner payload");
      }
    }
  }
  SUBCASE("byte flips never pass silently") {
    const std::string payload = "{\"tower\":\"T0\",\"secret\":12345}";
    const auto blob = seal(payload, pair.pub);
    Rng fuzz(404);
    for (int trial = 0; trial < 300; ++trial) {
      auto corrupted = blob;
      const size_t pos = fuzz.uniform_index(corrupted.size());
      const char flip = static_cast<char>(1 + fuzz.uniform_index(255));
      corrupted[pos] = static_cast<char>(corrupted[pos] ^ flip);
      if (corrupted == blob) continue;
      CHECK_THROWS_AS(unseal(corrupted, pair.prv), UnsealError);
    }
  }
}

TEST_CASE("ctpm_collect") {
  std::vector<std::string> repository;
  for (int i = 0; i < 16; ++i) repository.push_back("P" + std::to_string(i));

  SUBCASE("one round when everyone answers and j0 covers l") {
    Rng rng(1);
    const auto outcome = ctpm_collect(
        repository,
        [](const std::string&) {
          return std::optional<RankedLabels>{RankedLabels{{{"B", "R"}, 1.0}}};
        },
        4, 3, rng);
    CHECK(outcome.iterations == 1);
    CHECK(outcome.queried.size() == 4);
    CHECK(outcome.non_na == 4);
  }
  SUBCASE("all-NA repositories follow the doubling closed form") {
    auto never = [](const std::string&) -> std::optional<RankedLabels> {
      return std::nullopt;
    };
    for (int m : {1, 3, 5, 8, 16, 100}) {
      for (int j0 : {1, 2, 4}) {
        std::vector<std::string> repo;
        for (int i = 0; i < m; ++i) repo.push_back("P" + std::to_string(i));
        Rng rng(7);
        int iterations = -1;
        int queried = -1;
        try {
          ctpm_collect(repo, never, j0, 2, rng);
          FAIL("expected CollectExhausted");
        } catch (const CollectExhausted& e) {
          iterations = e.outcome.iterations;
          queried = static_cast<int>(e.outcome.queried.size());
        }
        CHECK(queried == m);  // exhausted without repeats
        const int closed_form =
            m <= j0 ? 1
                    : static_cast<int>(std::ceil(
                          std::log2(static_cast<double>(m) / j0))) +
                          1;
        CHECK(iterations == closed_form);
      }
    }
  }
  SUBCASE("provider picks never repeat") {
    Rng rng(3);
    std::set<std::string> seen;
    bool duplicate = false;
    try {
      ctpm_collect(
          repository,
          [&](const std::string& id) -> std::optional<RankedLabels> {
            if (!seen.insert(id).second) duplicate = true;
            return std::nullopt;
          },
          1, 5, rng);
    } catch (const fusion::NoInformationError&) {
    }
    CHECK_FALSE(duplicate);
    CHECK(seen.size() == repository.size());
  }
  SUBCASE("non-NA responses can exceed l and all are returned") {
    Rng rng(5);
    const auto outcome = ctpm_collect(
        repository,
        [](const std::string&) {
          return std::optional<RankedLabels>{RankedLabels{{{"B", "R"}, 1.0}}};
        },
        6, 2, rng);
    CHECK(outcome.non_na == 6);
    CHECK(outcome.queried.size() == 6);
  }
  SUBCASE("parameter validation") {
    Rng rng(1);
    auto ok = [](const std::string&) -> std::optional<RankedLabels> {
      return std::nullopt;
    };
    CHECK_THROWS_AS(ctpm_collect(repository, ok, 0, 1, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(ctpm_collect(repository, ok, 1, 0, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("routing end to end") {
  auto overlay = Overlay::build(two_city_topology(), 17);
  for (const auto& id : {"A", "B", "NA"})
    overlay.register_provider(id, "T0", AreaLevel::kCellTower);
  install_providers(overlay);

  RouteOptions options;
  options.collaborators = 2;
  options.accept_threshold = 0.0;

  SUBCASE("single-replica topology has a unique hop chain") {
    Rng rng(1);
    Trace trace;
    const auto result = overlay.route_request("requester", sample_payload(),
                                              "T0", rng, options, &trace);
    CHECK(result.status == RouteResult::Status::kDelivered);
    REQUIRE(result.hop_path.size() == 5);
    CHECK(result.hop_path[0] == "pm:country:C#0");
    CHECK(result.hop_path[4] == "pm:cell_tower:T0#0");
    CHECK(result.accepted.has_value());
    CHECK(result.fused.total() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(result.metadata.responses_used >= 2);
  }
  SUBCASE("seeded runs reproduce the hop path and trace bytes") {
    auto snapshot = [&](uint64_t seed) {
      auto fresh = Overlay::build(two_city_topology({3, 2, 2, 1, 1}), 17);
      for (const auto& id : {"A", "B", "NA"})
        fresh.register_provider(id, "T0", AreaLevel::kCellTower);
      install_providers(fresh);
      Rng rng(seed);
      Trace trace;
      fresh.route_request("requester", sample_payload(), "T0", rng, options,
                          &trace);
      std::ostringstream out;
      trace.save_jsonl(out);
      return out.str();
    };
    CHECK(snapshot(99) == snapshot(99));
    CHECK(snapshot(99) != snapshot(100));
  }
  SUBCASE("unknown tower returns a typed routing error") {
    Rng rng(1);
    const auto result = overlay.route_request("requester", sample_payload(),
                                              "T77", rng, options, nullptr);
    CHECK(result.status == RouteResult::Status::kRoutingFailed);
  }
  SUBCASE("empty repository surfaces no-information") {
    Rng rng(1);
    const auto result = overlay.route_request("requester", sample_payload(),
                                              "T3", rng, options, nullptr);
    CHECK(result.status == RouteResult::Status::kNoInformation);
  }
  SUBCASE("privacy contract holds across seeded requests") {
    Trace trace;
    for (int i = 0; i < 20; ++i) {
      Rng rng(1000 + i);
      overlay.route_request("requester", sample_payload(),
                            i % 2 == 0 ? "T0" : "T3", rng, options, &trace);
    }
    const auto violations = check_privacy_contract(trace);
    for (const auto& v : violations) MESSAGE(v);
    CHECK(violations.empty());
  }
  SUBCASE("intermediate hops never see features or results") {
    Rng rng(8);
    Trace trace;
    overlay.route_request("requester", sample_payload(), "T0", rng, options,
                          &trace);
    for (const auto& event : trace.events) {
      if (event.node == "requester" || event.node == "pm:cell_tower:T0#0")
        continue;
      const auto dump = event.observed.dump();
      CHECK(dump.find("home-ap") == std::string::npos);
      CHECK(dump.find("sound_level") == std::string::npos);
      CHECK(dump.find("probability") == std::string::npos);
    }
  }
  SUBCASE("trace jsonl round trips") {
    Rng rng(4);
    Trace trace;
    overlay.route_request("requester", sample_payload(), "T0", rng, options,
                          &trace);
    std::stringstream buffer;
    trace.save_jsonl(buffer);
    const auto restored = Trace::load_jsonl(buffer);
    REQUIRE(restored.events.size() == trace.events.size());
    std::ostringstream second;
    restored.save_jsonl(second);
    CHECK(second.str() == buffer.str());
    CHECK(check_privacy_contract(restored).empty());
  }
}

TEST_CASE("learned utilities receive feedback at the ctpm") {
  auto overlay = Overlay::build(two_city_topology(), 3);
  overlay.register_provider("good", "T0", AreaLevel::kCellTower);
  overlay.register_provider("bad", "T0", AreaLevel::kCellTower);
  overlay.set_provider_query(
      [](const std::string& id,
         const RequestPayload&) -> std::optional<RankedLabels> {
        if (id == "good")
          return RankedLabels{{{"B0", "R0"}, 0.9}, {{"B0", "R1"}, 0.1}};
        return RankedLabels{{{"B9", "R9"}, 0.8}, {{"B0", "R0"}, 0.1}};
      });

  std::map<std::string, double> utilities{{"good", 1.0}, {"bad", 1.0}};
  RouteOptions options;
  options.collaborators = 2;
  options.accept_threshold = 0.4;
  options.utility_of = [&](const std::string& id) {
    return fusion::Utility{utilities.at(id), 1.0};
  };
  options.feedback_hook = [&](const std::string& id, double feedback) {
    utilities[id] = fusion::update_noise_utility(utilities.at(id), feedback, 0.3);
  };

  for (int i = 0; i < 5; ++i) {
    Rng rng(50 + i);
    overlay.route_request("requester", sample_payload(), "T0", rng, options,
                          nullptr);
  }
  CHECK(utilities.at("good") > utilities.at("bad"));
}

}  // TEST_SUITE
