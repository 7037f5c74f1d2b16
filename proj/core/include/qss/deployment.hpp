#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include "qss/client.hpp"
#include "qss/config.hpp"
#include "qss/key_client.hpp"
#include "qss/key_supply.hpp"
#include "qss/net.hpp"
#include "qss/server.hpp"

namespace qss {

// The topology with the config's seed, key lifetime and authorized
// applications (owner and servers 1..n) applied.
TopologyConfig topology_for(const Config& config, TopologyConfig topo);

// Nodes for the owner and every server: the config's choice, otherwise
// round-robin over the nodes other than the KMS node. Fills
// config.server_nodes.
Directory assign_nodes(Config& config, const TopologyConfig& topo);

// Settings for server j; its state lives in <state_dir>/server-j.
ServerConfig server_config_for(const Config& config, std::uint32_t j);

struct DeploymentOptions {
  // Scheme parameters, pool mode, batch size and rate limits. Server
  // endpoints and nodes are filled in by the deployment.
  Config config;
  // Defaults to the five-node testbed topology.
  std::optional<TopologyConfig> topology;
  // Real sockets on 127.0.0.1 instead of the in-process network.
  bool tcp = false;
  std::shared_ptr<const Clock> clock;
};

// Key supply, n storage servers and an owner client in one process.
class LocalDeployment {
 public:
  explicit LocalDeployment(DeploymentOptions options);
  ~LocalDeployment();
  LocalDeployment(const LocalDeployment&) = delete;
  LocalDeployment& operator=(const LocalDeployment&) = delete;

  KeySupply& key_supply() { return *supply_; }
  OwnerClient& owner() { return *owner_; }
  KeyClient& owner_keys() { return *owner_keys_; }
  StorageServer& server(std::uint32_t j);
  Connector& connector();
  const Config& config() const { return config_; }
  const Directory& directory() const { return directory_; }
  PadAudit& pad_audit() { return audit_; }

  // A fresh client for the same owner, e.g. to run attempts in parallel.
  std::unique_ptr<OwnerClient> make_owner(OwnerState* state = nullptr);
  // Key access for another party, e.g. a test acting as a peer server.
  std::unique_ptr<KeyClient> make_key_client(std::uint16_t party);

  // The server stops accepting connections; its state is kept.
  void stop_server(std::uint32_t j);
  void start_server(std::uint32_t j);
  // Replaces the server object with a new one on the same state directory.
  void restart_server(std::uint32_t j);

  // Observes all loopback traffic; ignored in TCP mode.
  void set_tap(TrafficTap tap);

 private:
  struct ServerSlot;
  void launch(std::uint32_t j);
  void halt(std::uint32_t j);

  Config config_;
  bool tcp_;
  std::shared_ptr<const Clock> clock_;
  std::unique_ptr<KeySupply> supply_;
  Directory directory_;
  LoopbackNetwork loopback_;
  TcpConnector tcp_connector_;
  PadAudit audit_;
  std::map<std::uint32_t, std::unique_ptr<ServerSlot>> servers_;
  std::unique_ptr<KeyClient> owner_keys_;
  std::unique_ptr<OwnerClient> owner_;
};

}  // namespace qss
