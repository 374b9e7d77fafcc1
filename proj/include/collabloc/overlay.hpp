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

#ifndef COLLABLOC_OVERLAY_HPP_
#define COLLABLOC_OVERLAY_HPP_

#include <array>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "collabloc/fusion.hpp"
#include "collabloc/privacy.hpp"
#include "collabloc/rng.hpp"

#include "json.hpp"

namespace collabloc::overlay {

using privacy::AreaLevel;
using privacy::RankedLabels;

// ---------------------------------------------------------------------------
// Topology

// Region tree: the root is the country, leaves at depth 4 are cell towers.
struct RegionNode {
  std::string name;
  std::vector<RegionNode> children;
};

struct TopologyConfig {
  RegionNode root;
  // Replica count per level, indexed by level_rank (Country first).
  std::array<int, 5> replication{1, 1, 1, 1, 1};
};

TopologyConfig parse_topology_json(const nlohmann::json& j);
nlohmann::json topology_to_json(const TopologyConfig& config);

// ---------------------------------------------------------------------------
// Sealed envelopes

// Thrown on a wrong key, a tampered blob, or out-of-order opening.
struct UnsealError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Key material for the reference sealed-box codec. The codec is structural,
// not cryptographic: a box records which opener it expects and a checksum,
// and unseal verifies both. A real cipher plugs in behind the same seal /
// unseal signatures (see docs/schemas.md).
struct OpenerKey {
  std::string id;
  uint64_t secret = 0;
};

struct SealerKey {
  std::string id;
  uint64_t fingerprint = 0;  // derived from the opener's secret
};

SealerKey sealer_of(const OpenerKey& key);

// Fresh asymmetric pair, one per request, never reused.
struct RequestKeyPair {
  SealerKey pub;   // Pu_R, travels with the request
  OpenerKey prv;   // Pr_R, stays with the requester
};

RequestKeyPair make_request_keypair(const std::string& request_id, Rng& rng);

std::string seal(const std::string& plaintext, const SealerKey& key);
std::string unseal(const std::string& blob, const OpenerKey& key);

// Layered envelope over a hop sequence: hop i can open exactly layer i and
// learns only the next hop; the payload surfaces only at the last hop.
// Layer plaintext is {"to": <next hop id>, "body": <inner blob>} and the
// terminal layer is {"payload": <payload>}.
std::string seal_onion(const std::string& payload,
                       const std::vector<SealerKey>& hops);

// ---------------------------------------------------------------------------
// Event trace

struct TraceEvent {
  double time = 0.0;
  std::string event;
  std::string node;
  std::string request_id;
  nlohmann::json observed;  // exactly the plaintext this node could read
};

struct Trace {
  std::vector<TraceEvent> events;

  void append(double time, std::string event, std::string node,
              std::string request_id, nlohmann::json observed);
  void save_jsonl(std::ostream& out) const;
  static Trace load_jsonl(std::istream& in);
};

// Re-checks the anonymity contract on a trace: no hop other than the
// requester and the terminal CTPM may observe request features or result
// payloads, every request terminates, and hop chains stay bounded.
// Returns human-readable violations; empty means the contract holds.
std::vector<std::string> check_privacy_contract(const Trace& trace);

// ---------------------------------------------------------------------------
// Nodes and routing

struct PmNode {
  std::string id;
  AreaLevel level = AreaLevel::kCountry;
  std::string region;
  std::vector<std::string> children;    // node ids one level down
  std::vector<std::string> repository;  // provider ids (CTPM level only)
};

struct RequestPayload {
  fingerprint::WifiScan scan;
  fingerprint::FeatureVector features;
};

// A provider's answer to a CTPM query: ranked labels or NA.
using ProviderQueryFn = std::function<std::optional<RankedLabels>(
    const std::string& provider_id, const RequestPayload& request)>;

struct CollectOutcome {
  // Every provider queried, in query order, with its response.
  std::vector<std::pair<std::string, std::optional<RankedLabels>>> queried;
  int iterations = 0;  // r
  int non_na = 0;
};

// Raised when the repository ran dry with zero non-NA responses; carries the
// exhausted outcome so callers can still observe the iteration count.
struct CollectExhausted : fusion::NoInformationError {
  explicit CollectExhausted(CollectOutcome o)
      : fusion::NoInformationError(
            "ctpm_collect: repository exhausted with no non-NA response"),
        outcome(std::move(o)) {}
  CollectOutcome outcome;
};

// The CTPM collection loop: the first round queries j0 providers sampled
// without replacement; while fewer than l non-NA responses have arrived and
// providers remain, each further round doubles the cumulative number of
// providers queried. Returns every response gathered (non-NA responses may
// exceed l; all are fused). Throws fusion::NoInformationError when the
// repository is exhausted with zero non-NA responses.
CollectOutcome ctpm_collect(
    const std::vector<std::string>& repository,
    const std::function<std::optional<RankedLabels>(const std::string&)>& query,
    int j0, int l, Rng& rng);

struct RouteOptions {
  int collaborators = 1;              // l
  int initial_pick = 0;               // j0; 0 means max(1, ceil(l / 2))
  double accept_threshold = 0.5;      // requester-side acceptance
  std::function<fusion::Utility(const std::string&)> utility_of;  // per provider
  // CTPM-side feedback after its own acceptance check: provider id and a
  // [0,1] quality signal, used to maintain noise utilities.
  std::function<void(const std::string&, double)> feedback_hook;
  // Trace correlation id; empty falls back to a per-overlay counter. Must be
  // unique within one trace.
  std::string request_id;
};

struct RouteResult {
  enum class Status { kDelivered, kNoInformation, kRoutingFailed };
  Status status = Status::kRoutingFailed;
  classifier::LabelDistribution fused;
  std::optional<fingerprint::LocationLabel> accepted;
  fusion::FusionMetadata metadata;
  std::vector<std::string> hop_path;
  std::string error;
};

// The PM hierarchy plus provider registrations; runs one onion-routed
// request at a time through a deterministic event loop.
class Overlay {
 public:
  static Overlay build(const TopologyConfig& config, uint64_t key_seed);

  // Adds the provider to the repository of every CTPM inside its area-level
  // region around the home tower. Throws on an unknown tower.
  void register_provider(const std::string& provider_id,
                         const std::string& home_tower, AreaLevel area_level);
  void clear_registrations();

  // Installed by the simulation; invoked by CTPMs during collection.
  void set_provider_query(ProviderQueryFn fn) { provider_query_ = std::move(fn); }

  // Routes one request end to end: onion down the hierarchy, collection and
  // fusion at the CTPM, sealed result back along the same path.
  RouteResult route_request(const std::string& requester_id,
                            const RequestPayload& payload,
                            const std::string& target_tower, Rng& rng,
                            const RouteOptions& options, Trace* trace = nullptr);

  // One replica per level along the branch to the tower, chosen uniformly.
  std::vector<std::string> sample_path(const std::string& target_tower,
                                       Rng& rng) const;

  const std::map<std::string, PmNode>& nodes() const { return nodes_; }
  std::vector<std::string> tower_names() const;
  std::vector<std::string> ctpms_of_tower(const std::string& tower) const;
  // Tower regions whose CTPMs list this provider.
  std::vector<std::string> towers_listing(const std::string& provider_id) const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::map<std::string, PmNode> nodes_;
  std::map<std::string, OpenerKey> node_keys_;
  // Tower name -> chain of region names from country down to the tower.
  std::map<std::string, std::vector<std::string>> tower_branch_;
  // Region name at each level -> node ids of its replicas.
  std::map<std::string, std::vector<std::string>> region_replicas_;
  ProviderQueryFn provider_query_;
  uint64_t request_counter_ = 0;
};

}  // namespace collabloc::overlay

#endif  // COLLABLOC_OVERLAY_HPP_
