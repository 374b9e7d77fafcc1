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
#include <cstdio>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace collabloc::overlay {

using nlohmann::json;

namespace {

const char* kLevelNames[5] = {"country", "state", "county", "city",
                              "cell_tower"};

AreaLevel level_at_rank(int rank) {
  switch (rank) {
    case 0: return AreaLevel::kCountry;
    case 1: return AreaLevel::kState;
    case 2: return AreaLevel::kCounty;
    case 3: return AreaLevel::kCity;
    case 4: return AreaLevel::kCellTower;
  }
  throw std::invalid_argument("bad level rank");
}

uint64_t fnv1a64(const std::string& data, uint64_t h = 0xcbf29ce484222325ull) {
  for (char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string region_key(int rank, const std::string& name) {
  return std::to_string(rank) + ":" + name;
}

}  // namespace

// ---------------------------------------------------------------------------
// Topology

namespace {

RegionNode region_from_json(const json& j) {
  RegionNode node;
  node.name = j.at("name").get<std::string>();
  if (node.name.empty()) throw std::invalid_argument("empty region name");
  if (j.contains("children"))
    for (const auto& child : j.at("children"))
      node.children.push_back(region_from_json(child));
  return node;
}

json region_to_json(const RegionNode& node) {
  json j{{"name", node.name}};
  if (!node.children.empty()) {
    json children = json::array();
    for (const auto& child : node.children)
      children.push_back(region_to_json(child));
    j["children"] = std::move(children);
  }
  return j;
}

}  // namespace

TopologyConfig parse_topology_json(const json& j) {
  TopologyConfig config;
  config.root = region_from_json(j.at("regions"));
  if (j.contains("replication")) {
    const auto& rep = j.at("replication");
    for (int rank = 0; rank < 5; ++rank)
      if (rep.contains(kLevelNames[rank]))
        config.replication[rank] = rep.at(kLevelNames[rank]).get<int>();
  }
  for (int rank = 0; rank < 5; ++rank)
    if (config.replication[rank] < 1)
      throw std::invalid_argument("replication counts must be >= 1");
  return config;
}

json topology_to_json(const TopologyConfig& config) {
  json rep;
  for (int rank = 0; rank < 5; ++rank)
    rep[kLevelNames[rank]] = config.replication[rank];
  return json{{"replication", std::move(rep)},
              {"regions", region_to_json(config.root)}};
}

// ---------------------------------------------------------------------------
// Sealed envelopes

SealerKey sealer_of(const OpenerKey& key) {
  return SealerKey{key.id, mix64(key.secret ^ 0x5ea1ed0b0c0dec0dull)};
}

RequestKeyPair make_request_keypair(const std::string& request_id, Rng& rng) {
  OpenerKey prv{"key:" + request_id, rng.next_u64()};
  return RequestKeyPair{sealer_of(prv), prv};
}

std::string seal(const std::string& plaintext, const SealerKey& key) {
  json box{{"sealed_for", key.id},
           {"fp", key.fingerprint},
           {"body", plaintext}};
  box["mac"] = fnv1a64(key.id + "\x1f" + std::to_string(key.fingerprint) +
                       "\x1f" + plaintext);
  return box.dump();
}

std::string unseal(const std::string& blob, const OpenerKey& key) {
  json box;
  try {
    box = json::parse(blob);
  } catch (const json::exception&) {
    throw UnsealError("unseal: malformed envelope");
  }
  try {
    const auto sealed_for = box.at("sealed_for").get<std::string>();
    const auto fp = box.at("fp").get<uint64_t>();
    const auto body = box.at("body").get<std::string>();
    const auto mac = box.at("mac").get<uint64_t>();
    if (sealed_for != key.id) throw UnsealError("unseal: wrong recipient");
    if (fp != sealer_of(key).fingerprint) throw UnsealError("unseal: wrong key");
    if (mac != fnv1a64(sealed_for + "\x1f" + std::to_string(fp) + "\x1f" + body))
      throw UnsealError("unseal: checksum mismatch");
    return body;
  } catch (const json::exception&) {
    throw UnsealError("unseal: malformed envelope");
  }
}

std::string seal_onion(const std::string& payload,
                       const std::vector<SealerKey>& hops) {
  if (hops.empty()) throw std::invalid_argument("seal_onion: no hops");
  std::string blob = seal(json{{"payload", payload}}.dump(), hops.back());
  for (auto it = hops.rbegin() + 1; it != hops.rend(); ++it) {
    const auto& next_hop = *(it - 1);
    blob = seal(json{{"to", next_hop.id}, {"body", blob}}.dump(), *it);
  }
  return blob;
}

// ---------------------------------------------------------------------------
// Trace

void Trace::append(double time, std::string event, std::string node,
                   std::string request_id, json observed) {
  events.push_back(TraceEvent{time, std::move(event), std::move(node),
                              std::move(request_id), std::move(observed)});
}

void Trace::save_jsonl(std::ostream& out) const {
  for (const auto& e : events) {
    const json j{{"t", e.time},
                 {"event", e.event},
                 {"node", e.node},
                 {"request", e.request_id},
                 {"observed", e.observed}};
    out << j.dump() << "\n";
  }
}

Trace Trace::load_jsonl(std::istream& in) {
  Trace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    trace.append(j.at("t").get<double>(), j.at("event").get<std::string>(),
                 j.at("node").get<std::string>(),
                 j.at("request").get<std::string>(), j.at("observed"));
  }
  return trace;
}

std::vector<std::string> check_privacy_contract(const Trace& trace) {
  std::vector<std::string> violations;
  std::map<std::string, std::vector<const TraceEvent*>> by_request;
  for (const auto& e : trace.events) by_request[e.request_id].push_back(&e);

  static const std::set<std::string> kOpaqueKeys = {"from", "next_hop", "to",
                                                    "error"};

  for (const auto& [request_id, events] : by_request) {
    std::string requester, terminal;
    std::vector<std::string> canaries;
    bool terminated = false;
    int hops = 0;
    for (const auto* e : events) {
      if (e->event == "request_created") {
        requester = e->node;
        if (e->observed.contains("features"))
          canaries.push_back(e->observed.at("features").dump());
      } else if (e->event == "ctpm_payload") {
        terminal = e->node;
      } else if (e->event == "delivered") {
        terminated = true;
        if (e->observed.contains("result"))
          canaries.push_back(e->observed.at("result").dump());
      } else if (e->event == "route_error") {
        terminated = true;
      } else if (e->event == "hop_received" || e->event == "response_hop") {
        ++hops;
      }
    }
    if (!terminated)
      violations.push_back(request_id + ": request did not terminate");
    if (hops > 12)
      violations.push_back(request_id + ": hop count exceeds bound");

    for (const auto* e : events) {
      if (e->node == requester || (!terminal.empty() && e->node == terminal))
        continue;
      for (const auto& [key, _] : e->observed.items())
        if (!kOpaqueKeys.count(key))
          violations.push_back(request_id + ": node " + e->node +
                               " observed field '" + key + "'");
      const std::string dump = e->observed.dump();
      for (const auto& canary : canaries)
        if (canary.size() > 2 && dump.find(canary) != std::string::npos)
          violations.push_back(request_id + ": node " + e->node +
                               " observed sensitive payload");
    }
  }
  return violations;
}

// ---------------------------------------------------------------------------
// Overlay

Overlay Overlay::build(const TopologyConfig& config, uint64_t key_seed) {
  for (int rank = 0; rank + 1 < 5; ++rank)
    if (config.replication[rank] < config.replication[rank + 1]) {
      std::fprintf(stderr,
                   "overlay: replication at %s (%d) below %s (%d); top levels "
                   "usually replicate more\n",
                   kLevelNames[rank], config.replication[rank],
                   kLevelNames[rank + 1], config.replication[rank + 1]);
      break;
    }

  Overlay overlay;
  Rng key_rng(key_seed);

  // Depth-first walk; regions must bottom out exactly at the tower level.
  struct Frame {
    const RegionNode* region;
    int rank;
    std::vector<std::string> branch;
  };
  std::vector<Frame> stack{{&config.root, 0, {}}};
  while (!stack.empty()) {
    auto [region, rank, branch] = stack.back();
    stack.pop_back();
    branch.push_back(region->name);

    const std::string key = region_key(rank, region->name);
    if (overlay.region_replicas_.count(key))
      throw std::invalid_argument("duplicate region name at one level: " +
                                  region->name);

    auto& replicas = overlay.region_replicas_[key];
    for (int i = 0; i < config.replication[rank]; ++i) {
      PmNode node;
      node.id = std::string("pm:") + kLevelNames[rank] + ":" + region->name +
                "#" + std::to_string(i);
      node.level = level_at_rank(rank);
      node.region = region->name;
      replicas.push_back(node.id);
      overlay.node_keys_[node.id] =
          OpenerKey{node.id, key_rng.derive(node.id).next_u64()};
      overlay.nodes_.emplace(node.id, std::move(node));
    }

    if (rank == 4) {
      if (!region->children.empty())
        throw std::invalid_argument("tower region has children: " + region->name);
      overlay.tower_branch_[region->name] = branch;
      continue;
    }
    if (region->children.empty())
      throw std::invalid_argument("region tree ends above tower level at: " +
                                  region->name);
    for (const auto& child : region->children)
      stack.push_back({&child, rank + 1, branch});
  }

  // Children of every replica are all replicas of its child regions.
  std::vector<Frame> wiring{{&config.root, 0, {}}};
  while (!wiring.empty()) {
    auto [region, rank, _] = wiring.back();
    wiring.pop_back();
    for (const auto& parent_id :
         overlay.region_replicas_.at(region_key(rank, region->name))) {
      auto& parent = overlay.nodes_.at(parent_id);
      for (const auto& child : region->children)
        for (const auto& child_id :
             overlay.region_replicas_.at(region_key(rank + 1, child.name)))
          parent.children.push_back(child_id);
    }
    for (const auto& child : region->children)
      if (rank + 1 < 4) wiring.push_back({&child, rank + 1, {}});
  }
  return overlay;
}

void Overlay::register_provider(const std::string& provider_id,
                                const std::string& home_tower,
                                AreaLevel area_level) {
  auto branch_it = tower_branch_.find(home_tower);
  if (branch_it == tower_branch_.end())
    throw std::invalid_argument("register_provider: unknown tower " +
                                home_tower);
  const int rank = privacy::level_rank(area_level);
  const std::string& region = branch_it->second[rank];

  for (const auto& [tower, branch] : tower_branch_) {
    if (branch[rank] != region) continue;
    for (const auto& node_id : region_replicas_.at(region_key(4, tower))) {
      auto& repo = nodes_.at(node_id).repository;
      if (std::find(repo.begin(), repo.end(), provider_id) == repo.end())
        repo.push_back(provider_id);
    }
  }
}

void Overlay::clear_registrations() {
  for (auto& [_, node] : nodes_) node.repository.clear();
}

std::vector<std::string> Overlay::tower_names() const {
  std::vector<std::string> names;
  for (const auto& [tower, _] : tower_branch_) names.push_back(tower);
  return names;
}

std::vector<std::string> Overlay::ctpms_of_tower(const std::string& tower) const {
  return region_replicas_.at(region_key(4, tower));
}

std::vector<std::string> Overlay::towers_listing(
    const std::string& provider_id) const {
  std::set<std::string> towers;
  for (const auto& [id, node] : nodes_)
    if (node.level == AreaLevel::kCellTower &&
        std::find(node.repository.begin(), node.repository.end(),
                  provider_id) != node.repository.end())
      towers.insert(node.region);
  return {towers.begin(), towers.end()};
}

std::vector<std::string> Overlay::sample_path(const std::string& target_tower,
                                              Rng& rng) const {
  auto branch_it = tower_branch_.find(target_tower);
  if (branch_it == tower_branch_.end())
    throw std::invalid_argument("sample_path: unknown tower " + target_tower);
  std::vector<std::string> path;
  for (int rank = 0; rank < 5; ++rank) {
    const auto& replicas =
        region_replicas_.at(region_key(rank, branch_it->second[rank]));
    path.push_back(replicas[rng.uniform_index(replicas.size())]);
  }
  return path;
}

CollectOutcome ctpm_collect(
    const std::vector<std::string>& repository,
    const std::function<std::optional<RankedLabels>(const std::string&)>& query,
    int j0, int l, Rng& rng) {
  if (l < 1) throw std::invalid_argument("ctpm_collect: l must be >= 1");
  if (j0 < 1) throw std::invalid_argument("ctpm_collect: j0 must be >= 1");

  CollectOutcome out;
  std::vector<std::string> remaining = repository;
  size_t queried_total = 0;
  size_t round_target = static_cast<size_t>(j0);

  while (!remaining.empty() && out.non_na < l) {
    const size_t want =
        std::min(round_target - queried_total, remaining.size());
    // Partial Fisher-Yates: the first `want` slots become this round's picks.
    for (size_t i = 0; i < want; ++i) {
      const size_t j = i + rng.uniform_index(remaining.size() - i);
      std::swap(remaining[i], remaining[j]);
    }
    ++out.iterations;
    for (size_t i = 0; i < want; ++i) {
      auto response = query(remaining[i]);
      if (response) ++out.non_na;
      out.queried.emplace_back(remaining[i], std::move(response));
    }
    remaining.erase(remaining.begin(),
                    remaining.begin() + static_cast<long>(want));
    queried_total += want;
    round_target = queried_total * 2;  // j_new = 2 * j_old on the running total
  }

  if (out.non_na == 0) throw CollectExhausted(std::move(out));
  return out;
}

namespace {

json payload_to_json(const RequestPayload& payload, const SealerKey& reply_key,
                     const std::string& tower) {
  json wifi = json::array();
  for (const auto& r : payload.scan.readings)
    wifi.push_back({{"bssid", r.bssid}, {"rssi_dbm", r.rssi_dbm}});
  return json{{"tower", tower},
              {"wifi", std::move(wifi)},
              {"captured_at", payload.scan.captured_at},
              {"numeric", payload.features.numeric},
              {"categorical", payload.features.categorical},
              {"reply_key",
               {{"id", reply_key.id}, {"fingerprint", reply_key.fingerprint}}}};
}

struct Message {
  double time = 0.0;
  uint64_t seq = 0;
  std::string to;
  std::string from;
  enum class Kind { kRequest, kResponse } kind = Kind::kRequest;
  std::string blob;
};

struct MessageLater {
  bool operator()(const Message& a, const Message& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

}  // namespace

RouteResult Overlay::route_request(const std::string& requester_id,
                                   const RequestPayload& payload,
                                   const std::string& target_tower, Rng& rng,
                                   const RouteOptions& options, Trace* trace) {
  const std::string request_id =
      "req-" + std::to_string(request_counter_++);
  RouteResult result;

  if (!tower_branch_.count(target_tower)) {
    result.status = RouteResult::Status::kRoutingFailed;
    result.error = "unknown tower: " + target_tower;
    if (trace)
      trace->append(0.0, "route_error", requester_id, request_id,
                    json{{"error", result.error}});
    return result;
  }

  const auto path = sample_path(target_tower, rng);
  result.hop_path = path;
  const auto keypair = make_request_keypair(request_id, rng);

  const json payload_json =
      payload_to_json(payload, keypair.pub, target_tower);
  if (trace)
    trace->append(0.0, "request_created", requester_id, request_id,
                  json{{"tower", target_tower}, {"features", payload_json}});

  std::vector<SealerKey> hop_keys;
  for (const auto& node_id : path)
    hop_keys.push_back(sealer_of(node_keys_.at(node_id)));
  const std::string onion = seal_onion(payload_json.dump(), hop_keys);

  std::priority_queue<Message, std::vector<Message>, MessageLater> queue;
  uint64_t seq = 0;
  queue.push({1.0, seq++, path.front(), requester_id, Message::Kind::kRequest,
              onion});

  std::map<std::string, std::string> reply_to;  // node -> previous hop
  const std::string& ctpm_id = path.back();

  while (!queue.empty()) {
    const Message msg = queue.top();
    queue.pop();

    if (msg.to == requester_id) {
      // Final delivery back at the requester.
      std::string plain;
      try {
        plain = unseal(msg.blob, keypair.prv);
      } catch (const UnsealError& e) {
        result.status = RouteResult::Status::kRoutingFailed;
        result.error = e.what();
        if (trace)
          trace->append(msg.time, "route_error", requester_id, request_id,
                        json{{"error", result.error}});
        return result;
      }
      const json j = json::parse(plain);
      if (j.contains("error")) {
        result.status = RouteResult::Status::kNoInformation;
        result.error = j.at("error").get<std::string>();
        if (trace)
          trace->append(msg.time, "route_error", requester_id, request_id,
                        json{{"error", result.error}});
        return result;
      }
      for (const auto& item : j.at("labels"))
        result.fused.mass[fingerprint::LocationLabel{
            item.at("building").get<std::string>(),
            item.at("room").get<std::string>()}] =
            item.at("probability").get<double>();
      result.metadata.responses_used = j.at("responses_used").get<int>();
      result.metadata.iterations = j.at("iterations").get<int>();
      result.metadata.providers_contacted =
          j.at("providers_contacted").get<int>();
      result.status = RouteResult::Status::kDelivered;
      result.accepted =
          fusion::accept_label(result.fused, options.accept_threshold);
      if (trace)
        trace->append(msg.time, "delivered", requester_id, request_id,
                      json{{"result", json::parse(plain)}});
      return result;
    }

    const auto& node = nodes_.at(msg.to);
    const auto& node_key = node_keys_.at(msg.to);

    if (msg.kind == Message::Kind::kResponse) {
      if (trace)
        trace->append(msg.time, "response_hop", msg.to, request_id,
                      json{{"to", reply_to.at(msg.to)}});
      queue.push({msg.time + 1.0, seq++, reply_to.at(msg.to), msg.to,
                  Message::Kind::kResponse, msg.blob});
      continue;
    }

    // Request on the way down.
    reply_to[msg.to] = msg.from;
    if (trace)
      trace->append(msg.time, "hop_received", msg.to, request_id,
                    json{{"from", msg.from}});

    const json layer = json::parse(unseal(msg.blob, node_key));
    if (msg.to != ctpm_id) {
      const auto next_hop = layer.at("to").get<std::string>();
      if (trace)
        trace->append(msg.time, "hop_forwarded", msg.to, request_id,
                      json{{"next_hop", next_hop}});
      queue.push({msg.time + 1.0, seq++, next_hop, msg.to,
                  Message::Kind::kRequest, layer.at("body").get<std::string>()});
      continue;
    }

    // Terminal CTPM: open the payload, collect, fuse, seal the result.
    const json request = json::parse(layer.at("payload").get<std::string>());
    if (trace)
      trace->append(msg.time, "ctpm_payload", msg.to, request_id,
                    json{{"features", request},
                         {"reply_key", request.at("reply_key").at("id")}});

    RequestPayload opened;
    for (const auto& r : request.at("wifi"))
      opened.scan.readings.push_back({r.at("bssid").get<std::string>(),
                                      r.at("rssi_dbm").get<double>()});
    opened.scan.captured_at = request.at("captured_at").get<double>();
    opened.features.numeric =
        request.at("numeric").get<std::map<std::string, double>>();
    opened.features.categorical =
        request.at("categorical").get<std::map<std::string, std::string>>();

    const SealerKey reply_key{
        request.at("reply_key").at("id").get<std::string>(),
        request.at("reply_key").at("fingerprint").get<uint64_t>()};

    const int j0 = options.initial_pick > 0
                       ? options.initial_pick
                       : std::max(1, (options.collaborators + 1) / 2);
    std::string reply;
    try {
      if (!provider_query_)
        throw fusion::NoInformationError("ctpm: no providers attached");
      const auto outcome = ctpm_collect(
          node.repository,
          [&](const std::string& provider_id) {
            return provider_query_(provider_id, opened);
          },
          j0, options.collaborators, rng);
      if (trace) {
        json queried = json::array();
        for (const auto& [id, _] : outcome.queried) queried.push_back(id);
        trace->append(msg.time, "ctpm_collect", msg.to, request_id,
                      json{{"rounds", outcome.iterations},
                           {"queried", std::move(queried)},
                           {"non_na", outcome.non_na}});
      }
      std::vector<fusion::ProviderResponse> responses;
      for (const auto& [id, labels] : outcome.queried) {
        fusion::Utility utility =
            options.utility_of ? options.utility_of(id) : fusion::Utility{};
        responses.push_back({id, labels, utility});
      }
      const auto fused = fusion::weighted_average_fusion(responses);
      fusion::FusionMetadata meta{outcome.non_na, outcome.iterations,
                                  static_cast<int>(outcome.queried.size())};
      reply = fusion::fused_to_json(fused, meta);
      if (options.feedback_hook) {
        const auto accepted =
            fusion::accept_label(fused, options.accept_threshold);
        if (accepted)
          for (const auto& [id, labels] : outcome.queried)
            if (labels)
              options.feedback_hook(id,
                                    fusion::response_feedback(*labels, *accepted));
      }
      if (trace)
        trace->append(msg.time, "fusion_done", msg.to, request_id,
                      json{{"result", json::parse(reply)}});
    } catch (const fusion::NoInformationError& e) {
      reply = json{{"error", std::string("no_information: ") + e.what()}}.dump();
      if (trace)
        trace->append(msg.time, "fusion_done", msg.to, request_id,
                      json{{"result", json{{"error", "no_information"}}}});
    }
    queue.push({msg.time + 1.0, seq++, reply_to.at(msg.to), msg.to,
                Message::Kind::kResponse, seal(reply, reply_key)});
  }

  result.status = RouteResult::Status::kRoutingFailed;
  result.error = "message loop drained without delivery";
  if (trace)
    trace->append(0.0, "route_error", requester_id, request_id,
                  json{{"error", result.error}});
  return result;
}

}  // namespace collabloc::overlay
