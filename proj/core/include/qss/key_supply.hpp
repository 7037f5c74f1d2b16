#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qss/entropy.hpp"
#include "qss/key_file.hpp"

namespace qss {

struct LinkConfig {
  std::string name;
  NodeId a = 0;
  NodeId b = 0;
  // Octets per second the link may deliver when rate enforcement is on.
  double key_rate = 4096.0;
  double error_rate = 0.02;
  double length_km = 0.0;
  double loss_db = 0.0;
  std::string protocol;
};

struct TopologyConfig {
  std::vector<NodeId> nodes;
  std::vector<LinkConfig> links;
  NodeId kms_node = 0;
  // With a seed, link streams and fresh relay keys are reproducible.
  // Without one, they are seeded from OS entropy.
  std::optional<std::uint64_t> seed;
  std::set<std::string> authorized_apps;
  TimeMs key_ttl_ms = 3'600'000;
  // Reject generation beyond key_rate * elapsed + burst.
  bool enforce_rate = false;
  double burst_seconds = 1.0;
  // Top up link pools on demand inside relay_key.
  bool auto_generate = true;
  // Directory for per-node key-file persistence; empty keeps keys in memory.
  std::filesystem::path store_dir;
};

// Five trusted nodes, six links named after the Tokyo testbed. Nodes 1..4
// host the storage applications, node 5 is a pure relay and hosts the KMS.
TopologyConfig default_topology();

struct RouteEntry {
  std::vector<NodeId> path;
  std::vector<std::size_t> links;
  std::size_t hops() const { return links.size(); }
};

struct LinkStatus {
  std::string name;
  NodeId a = 0;
  NodeId b = 0;
  double key_rate = 0;
  double error_rate = 0;
  std::uint64_t accumulated = 0;
  std::uint64_t generated = 0;
  std::uint64_t consumed = 0;
};

struct RoutingTable {
  std::map<std::pair<NodeId, NodeId>, RouteEntry> routes;
  std::vector<LinkStatus> links;
  const RouteEntry& route(NodeId src, NodeId dst) const;
};

struct LedgerSnapshot {
  struct Link {
    std::string name;
    std::uint64_t generated = 0;
    std::uint64_t pooled_a = 0;
    std::uint64_t pooled_b = 0;
    std::uint64_t consumed = 0;
    std::uint64_t expired = 0;
  };
  std::vector<Link> links;
  // Key-file copies, in octets.
  std::uint64_t issued = 0;
  std::uint64_t live = 0;
  std::uint64_t consumed = 0;
  std::uint64_t expired = 0;
  bool balanced() const;
};

struct KsaRequest {
  std::string app_id;
  NodeId local_node = 0;
  NodeId peer_node = 0;
  std::string peer_app;
  std::uint64_t octets = 0;
  std::string purpose;
};

class KeySupply {
 public:
  explicit KeySupply(TopologyConfig config, std::shared_ptr<const Clock> clock = nullptr);
  ~KeySupply();
  KeySupply(const KeySupply&) = delete;
  KeySupply& operator=(const KeySupply&) = delete;

  const TopologyConfig& config() const { return config_; }
  const Clock& clock() const { return *clock_; }

  // Pushes n identical octets into both endpoint pools of the link.
  void generate_link_keys(const std::string& link, std::uint64_t n);

  // Shares a fresh n-octet key between src and dst via hop-by-hop
  // encapsulation; both copies land in the nodes' stores as available.
  KeyFile relay_key(NodeId src, NodeId dst, std::uint64_t n);

  // Relays a key and hands the requester's copy over (it becomes consumed);
  // the peer copy stays reserved for peer_app until fetched.
  KeyFile ksa_request(const KsaRequest& request);
  KeyFile ksa_fetch(const std::string& app_id, NodeId node, const KeyId& id);

  std::size_t expire_keys(TimeMs now);
  std::size_t expire_keys() { return expire_keys(clock_->now_ms()); }

  RoutingTable routing_table() const;
  const RouteEntry& route(NodeId src, NodeId dst) const;
  std::optional<std::size_t> link_index(const std::string& name) const;

  bool is_authorized(const std::string& app_id) const;
  void authorize(const std::string& app_id);

  std::vector<AuditRecord> audit_log() const;
  // Called for every audit record, e.g. to append to a file.
  void set_audit_sink(std::function<void(const AuditRecord&)> sink);

  LedgerSnapshot ledger() const;
  std::uint64_t pool_level(const std::string& link, NodeId node) const;
  // Copy of a KMA's pool, for checking that both ends agree.
  std::vector<std::uint8_t> pool_snapshot(const std::string& link, NodeId node) const;
  std::optional<KeyFile> stored_copy(NodeId node, const KeyId& id) const;

 private:
  struct Link;
  struct Node;

  Link& link_at(std::size_t index) const;
  Node& node(NodeId id) const;
  void top_up_locked(Link& link, std::uint64_t n, TimeMs now);
  KeyId next_key_id(NodeId issuer);
  void place_copy(Node& node, KeyFile copy);
  void emit_audit(AuditRecord record);
  void compute_routes();

  TopologyConfig config_;
  std::shared_ptr<const Clock> clock_;
  TimeMs start_ms_;
  std::vector<std::unique_ptr<Link>> links_;
  std::map<NodeId, std::unique_ptr<Node>> nodes_;
  std::map<std::pair<NodeId, NodeId>, RouteEntry> routes_;
  std::array<std::uint8_t, 6> instance_{};
  std::atomic<std::uint64_t> key_counter_{0};
  std::atomic<std::uint64_t> issued_octets_{0};

  mutable std::mutex apps_mu_;
  std::set<std::string> apps_;

  mutable std::mutex audit_mu_;
  std::vector<AuditRecord> audit_;
  std::function<void(const AuditRecord&)> audit_sink_;
};

}  // namespace qss
