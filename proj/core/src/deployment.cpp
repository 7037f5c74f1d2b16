#include "qss/deployment.hpp"

#include "qss/error.hpp"

namespace qss {

struct LocalDeployment::ServerSlot {
  std::unique_ptr<KeyClient> keys;
  std::shared_ptr<StorageServer> server;
  std::unique_ptr<TcpListener> listener;
  std::thread acceptor;
  bool running = false;
};

namespace {

Endpoint loopback_name(std::uint32_t j) { return "server-" + std::to_string(j); }

}  // namespace

TopologyConfig topology_for(const Config& config, TopologyConfig topo) {
  const SchemeParams params = config.params();
  if (config.topology_seed) topo.seed = config.topology_seed;
  topo.key_ttl_ms = config.key_ttl_ms;
  topo.authorized_apps.insert(app_for_party(kOwnerParty));
  for (std::uint32_t j = 1; j <= params.n; ++j) topo.authorized_apps.insert(app_for_party(static_cast<std::uint16_t>(j)));
  return topo;
}

Directory assign_nodes(Config& config, const TopologyConfig& topo) {
  // Application nodes: every node except a relay-only KMS node, unless
  // that is all there is.
  std::vector<NodeId> app_nodes;
  for (NodeId v : topo.nodes) {
    if (v != topo.kms_node) app_nodes.push_back(v);
  }
  if (app_nodes.empty()) app_nodes = topo.nodes;
  if (app_nodes.empty()) fail(ErrorCode::kConfig, "topology has no nodes");
  Directory directory;
  directory.owner_node = config.owner_node;
  for (std::uint32_t j = 1; j <= config.n; ++j) {
    auto it = config.server_nodes.find(j);
    const NodeId node = it != config.server_nodes.end() ? it->second : app_nodes[(j - 1) % app_nodes.size()];
    directory.server_nodes[static_cast<std::uint16_t>(j)] = node;
    config.server_nodes[j] = node;
  }
  return directory;
}

ServerConfig server_config_for(const Config& config, std::uint32_t j) {
  ServerConfig sc;
  sc.index = j;
  sc.n = config.n;
  sc.t = config.t;
  sc.pool_mode = config.pool_mode;
  sc.precompute_batch = config.precompute_batch;
  sc.rate_limit = config.rate_limit;
  sc.rate_window_ms = config.rate_window_ms;
  if (!config.state_dir.empty()) sc.state_dir = config.state_dir / ("server-" + std::to_string(j));
  sc.peers = config.servers;
  return sc;
}

LocalDeployment::LocalDeployment(DeploymentOptions options)
    : config_(std::move(options.config)),
      tcp_(options.tcp),
      clock_(options.clock ? std::move(options.clock) : std::make_shared<SystemClock>()) {
  const SchemeParams params = config_.params();
  TopologyConfig topo = topology_for(config_, options.topology ? std::move(*options.topology) : default_topology());
  directory_ = assign_nodes(config_, topo);
  supply_ = std::make_unique<KeySupply>(std::move(topo), clock_);

  for (std::uint32_t j = 1; j <= params.n; ++j) {
    auto slot = std::make_unique<ServerSlot>();
    slot->keys = std::make_unique<LocalKeyClient>(*supply_, directory_, static_cast<std::uint16_t>(j));
    if (tcp_) {
      // Bind every port first so each server starts with the full peer table.
      slot->listener = std::make_unique<TcpListener>("127.0.0.1:0");
      config_.servers[j] = "127.0.0.1:" + std::to_string(slot->listener->port());
    } else {
      config_.servers[j] = loopback_name(j);
    }
    servers_[j] = std::move(slot);
  }
  for (std::uint32_t j = 1; j <= params.n; ++j) launch(j);

  owner_keys_ = std::make_unique<LocalKeyClient>(*supply_, directory_, kOwnerParty);
  owner_ = make_owner();
}

LocalDeployment::~LocalDeployment() {
  for (auto& [j, slot] : servers_) halt(j);
  loopback_.shutdown();
}

Connector& LocalDeployment::connector() {
  if (tcp_) return tcp_connector_;
  return loopback_;
}

StorageServer& LocalDeployment::server(std::uint32_t j) {
  auto it = servers_.find(j);
  if (it == servers_.end()) fail(ErrorCode::kInvalidArgument, "no server " + std::to_string(j));
  return *it->second->server;
}

std::unique_ptr<OwnerClient> LocalDeployment::make_owner(OwnerState* state) {
  auto client = std::make_unique<OwnerClient>(config_, connector(), *owner_keys_, state);
  client->set_pad_audit(&audit_);
  return client;
}

std::unique_ptr<KeyClient> LocalDeployment::make_key_client(std::uint16_t party) {
  supply_->authorize(app_for_party(party));
  return std::make_unique<LocalKeyClient>(*supply_, directory_, party);
}

void LocalDeployment::launch(std::uint32_t j) {
  auto& slot = *servers_.at(j);
  if (!slot.server) {
    ServerConfig sc = server_config_for(config_, j);
    slot.server = std::make_shared<StorageServer>(std::move(sc), connector(), *slot.keys, clock_);
    slot.server->set_pad_audit(&audit_);
  }
  // Connection handlers share ownership, so a restart never pulls the
  // server out from under a live connection.
  std::shared_ptr<StorageServer> server = slot.server;
  ConnectionHandler handler = [server](std::unique_ptr<ByteStream> s) { server->serve(std::move(s)); };
  if (tcp_) {
    if (!slot.listener) slot.listener = std::make_unique<TcpListener>(config_.servers.at(j));
    slot.acceptor = std::thread([listener = slot.listener.get(), handler] { listener->serve(handler); });
  } else {
    loopback_.listen(config_.servers.at(j), handler);
  }
  slot.running = true;
}

void LocalDeployment::halt(std::uint32_t j) {
  auto& slot = *servers_.at(j);
  if (tcp_) {
    if (slot.listener) slot.listener->stop();
    if (slot.acceptor.joinable()) slot.acceptor.join();
    slot.listener.reset();
  } else {
    loopback_.unlisten(config_.servers.at(j));
  }
  slot.running = false;
}

void LocalDeployment::stop_server(std::uint32_t j) {
  if (servers_.at(j)->running) halt(j);
}

void LocalDeployment::start_server(std::uint32_t j) {
  if (!servers_.at(j)->running) launch(j);
}

void LocalDeployment::restart_server(std::uint32_t j) {
  stop_server(j);
  servers_.at(j)->server.reset();
  launch(j);
}

void LocalDeployment::set_tap(TrafficTap tap) { loopback_.set_tap(std::move(tap)); }

}  // namespace qss
