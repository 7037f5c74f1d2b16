#include "qss/key_supply.hpp"

#include <algorithm>
#include <deque>
#include <queue>

#include "qss/error.hpp"
#include "qss/wire.hpp"

namespace qss {

namespace {

constexpr std::uint64_t kNodeStreamBase = 0x10000;
constexpr std::uint64_t kInstanceStream = 0xFFFFFFFF;

std::vector<std::uint8_t> take_front(std::deque<std::uint8_t>& pool, std::uint64_t n) {
  std::vector<std::uint8_t> out(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
  std::fill_n(pool.begin(), n, std::uint8_t{0});
  pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

void xor_into(std::vector<std::uint8_t>& acc, const std::vector<std::uint8_t>& pad) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] ^= pad[i];
}

}  // namespace

TopologyConfig default_topology() {
  TopologyConfig cfg;
  cfg.nodes = {1, 2, 3, 4, 5};
  cfg.kms_node = 5;
  cfg.links = {
      {"NEC-0", 1, 2, 8192.0, 0.03, 50.0, 10.0, "BB84 with decoy"},
      {"Gakushuin", 1, 4, 8192.0, 0.04, 2.0, 2.0, "CV-QKD"},
      {"SeQureNet", 3, 4, 8192.0, 0.04, 2.0, 2.0, "CV-QKD"},
      {"Toshiba", 1, 5, 8192.0, 0.03, 45.0, 14.5, "BB84 with decoy"},
      {"NTT-NICT", 2, 5, 2048.0, 0.02, 90.0, 28.6, "DPS-QKD"},
      {"NEC-1", 3, 5, 8192.0, 0.03, 22.0, 13.0, "BB84 with decoy"},
  };
  return cfg;
}

const RouteEntry& RoutingTable::route(NodeId src, NodeId dst) const {
  auto it = routes.find({src, dst});
  if (it == routes.end()) fail(ErrorCode::kNoRoute, "no route " + std::to_string(src) + "->" + std::to_string(dst));
  return it->second;
}

bool LedgerSnapshot::balanced() const {
  for (const auto& l : links) {
    if (l.pooled_a != l.pooled_b) return false;
    if (l.generated != l.pooled_a + l.consumed + l.expired) return false;
  }
  return issued == live + consumed + expired;
}

struct KeySupply::Link {
  LinkConfig cfg;
  std::mutex mu;
  ChaChaEntropy gen_a;
  ChaChaEntropy gen_b;
  std::deque<std::uint8_t> pool_a;
  std::deque<std::uint8_t> pool_b;
  std::uint64_t generated = 0;
  std::uint64_t consumed = 0;

  Link(LinkConfig c, const ChaChaEntropy::Key& key, std::uint64_t stream)
      : cfg(std::move(c)), gen_a(key, stream), gen_b(key, stream) {}

  std::deque<std::uint8_t>& pool_of(NodeId n) {
    if (n == cfg.a) return pool_a;
    if (n == cfg.b) return pool_b;
    fail(ErrorCode::kInternal, "node " + std::to_string(n) + " is not on link " + cfg.name);
  }
};

struct KeySupply::Node {
  NodeId id;
  std::mutex mu;
  ChaChaEntropy rng;
  std::map<KeyId, KeyFile> store;
  std::filesystem::path dir;

  Node(NodeId i, const ChaChaEntropy::Key& key) : id(i), rng(key, kNodeStreamBase + i) {}

  std::filesystem::path file_for(const KeyId& id) const { return dir / (to_string(id) + ".key"); }
};

KeySupply::KeySupply(TopologyConfig config, std::shared_ptr<const Clock> clock)
    : config_(std::move(config)), clock_(clock ? std::move(clock) : std::make_shared<SystemClock>()) {
  start_ms_ = clock_->now_ms();

  ChaChaEntropy::Key root{};
  if (config_.seed) {
    root = ChaChaEntropy::derive_key(*config_.seed);
  } else {
    SystemEntropy os;
    os.fill(root);
  }
  ChaChaEntropy(root, kInstanceStream).fill(instance_);

  for (NodeId n : config_.nodes) {
    if (nodes_.count(n)) fail(ErrorCode::kConfig, "duplicate node " + std::to_string(n));
    auto node = std::make_unique<Node>(n, root);
    if (!config_.store_dir.empty()) {
      node->dir = config_.store_dir / ("node-" + std::to_string(n));
      std::filesystem::create_directories(node->dir);
    }
    nodes_.emplace(n, std::move(node));
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < config_.links.size(); ++i) {
    const auto& lc = config_.links[i];
    if (!nodes_.count(lc.a) || !nodes_.count(lc.b) || lc.a == lc.b) {
      fail(ErrorCode::kConfig, "link " + lc.name + " must join two distinct configured nodes");
    }
    if (!names.insert(lc.name).second) fail(ErrorCode::kConfig, "duplicate link " + lc.name);
    links_.push_back(std::make_unique<Link>(lc, root, i));
  }
  if (config_.kms_node != 0 && !nodes_.count(config_.kms_node)) fail(ErrorCode::kConfig, "KMS node is not configured");
  apps_ = config_.authorized_apps;
  compute_routes();
}

KeySupply::~KeySupply() = default;

void KeySupply::compute_routes() {
  std::map<NodeId, std::vector<std::pair<NodeId, std::size_t>>> adj;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    adj[links_[i]->cfg.a].emplace_back(links_[i]->cfg.b, i);
    adj[links_[i]->cfg.b].emplace_back(links_[i]->cfg.a, i);
  }
  for (auto& [n, list] : adj) std::sort(list.begin(), list.end());

  for (const auto& [src, _] : nodes_) {
    std::map<NodeId, std::pair<NodeId, std::size_t>> parent;
    std::set<NodeId> seen{src};
    std::queue<NodeId> q;
    q.push(src);
    while (!q.empty()) {
      const NodeId u = q.front();
      q.pop();
      for (const auto& [v, li] : adj[u]) {
        if (seen.insert(v).second) {
          parent[v] = {u, li};
          q.push(v);
        }
      }
    }
    for (NodeId dst : seen) {
      RouteEntry e;
      for (NodeId cur = dst; cur != src; cur = parent[cur].first) {
        e.path.push_back(cur);
        e.links.push_back(parent[cur].second);
      }
      e.path.push_back(src);
      std::reverse(e.path.begin(), e.path.end());
      std::reverse(e.links.begin(), e.links.end());
      routes_[{src, dst}] = std::move(e);
    }
  }
}

KeySupply::Link& KeySupply::link_at(std::size_t index) const { return *links_.at(index); }

KeySupply::Node& KeySupply::node(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) fail(ErrorCode::kNoRoute, "unknown node " + std::to_string(id));
  return *it->second;
}

std::optional<std::size_t> KeySupply::link_index(const std::string& name) const {
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (links_[i]->cfg.name == name) return i;
  }
  return std::nullopt;
}

const RouteEntry& KeySupply::route(NodeId src, NodeId dst) const {
  node(src);
  node(dst);
  auto it = routes_.find({src, dst});
  if (it == routes_.end()) fail(ErrorCode::kNoRoute, "no route " + std::to_string(src) + "->" + std::to_string(dst));
  return it->second;
}

void KeySupply::top_up_locked(Link& link, std::uint64_t n, TimeMs now) {
  if (n == 0) return;
  if (config_.enforce_rate) {
    const double elapsed = static_cast<double>(now - std::min(now, start_ms_)) / 1000.0;
    const double budget = link.cfg.key_rate * (elapsed + config_.burst_seconds);
    if (static_cast<double>(link.generated + n) > budget) {
      fail(ErrorCode::kKeyExhausted, "link " + link.cfg.name + " has not generated enough key yet");
    }
  }
  std::vector<std::uint8_t> buf(n);
  link.gen_a.fill(buf);
  link.pool_a.insert(link.pool_a.end(), buf.begin(), buf.end());
  link.gen_b.fill(buf);
  link.pool_b.insert(link.pool_b.end(), buf.begin(), buf.end());
  std::fill(buf.begin(), buf.end(), std::uint8_t{0});
  link.generated += n;
}

void KeySupply::generate_link_keys(const std::string& name, std::uint64_t n) {
  const auto idx = link_index(name);
  if (!idx) fail(ErrorCode::kUnknownLink, "unknown link " + name);
  Link& link = link_at(*idx);
  std::lock_guard lock(link.mu);
  top_up_locked(link, n, clock_->now_ms());
}

KeyId KeySupply::next_key_id(NodeId issuer) {
  KeyId id{};
  id[0] = static_cast<std::uint8_t>(issuer >> 8);
  id[1] = static_cast<std::uint8_t>(issuer);
  std::copy(instance_.begin(), instance_.end(), id.begin() + 2);
  const std::uint64_t c = key_counter_.fetch_add(1) + 1;
  for (int i = 0; i < 8; ++i) id[8 + i] = static_cast<std::uint8_t>(c >> (56 - 8 * i));
  return id;
}

void KeySupply::place_copy(Node& n, KeyFile copy) {
  std::lock_guard lock(n.mu);
  if (!n.dir.empty()) write_key_file(n.file_for(copy.id), copy);
  const KeyId id = copy.id;
  const std::uint64_t length = copy.length;
  if (!n.store.emplace(id, std::move(copy)).second) fail(ErrorCode::kInternal, "key id issued twice");
  issued_octets_ += length;
}

KeyFile KeySupply::relay_key(NodeId src, NodeId dst, std::uint64_t n) {
  if (n == 0) fail(ErrorCode::kInvalidArgument, "key length must be positive");
  const RouteEntry& r = route(src, dst);
  const TimeMs now = clock_->now_ms();

  std::vector<std::size_t> order = r.links;
  std::sort(order.begin(), order.end());
  std::vector<std::unique_lock<std::mutex>> locks;
  for (std::size_t li : order) locks.emplace_back(link_at(li).mu);

  for (std::size_t li : r.links) {
    Link& l = link_at(li);
    if (l.pool_a.size() < n && !config_.auto_generate) {
      fail(ErrorCode::kKeyExhausted, "link " + l.cfg.name + " pool holds " + std::to_string(l.pool_a.size()) +
                                         " octets, " + std::to_string(n) + " needed");
    }
  }
  for (std::size_t li : r.links) {
    Link& l = link_at(li);
    if (l.pool_a.size() < n) top_up_locked(l, n - l.pool_a.size(), now);
  }

  KeyFile file;
  file.id = next_key_id(src);
  file.route = r.path;
  file.length = n;
  file.created_at = now;
  file.expires_at = now + config_.key_ttl_ms;

  std::vector<std::uint8_t> key;
  std::vector<std::uint8_t> recovered;
  if (r.hops() == 1) {
    Link& l = link_at(r.links[0]);
    file.draws.push_back({l.cfg.name, l.consumed, n});
    key = take_front(l.pool_of(src), n);
    recovered = take_front(l.pool_of(dst), n);
    l.consumed += n;
  } else {
    key.resize(n);
    {
      Node& s = node(src);
      std::lock_guard lock(s.mu);
      s.rng.fill(key);
    }
    // Each hop: the sender XORs with its side of the link key, the receiver
    // strips it with its own identical copy.
    recovered = key;
    for (std::size_t h = 0; h < r.hops(); ++h) {
      Link& l = link_at(r.links[h]);
      file.draws.push_back({l.cfg.name, l.consumed, n});
      auto pad_out = take_front(l.pool_of(r.path[h]), n);
      auto pad_in = take_front(l.pool_of(r.path[h + 1]), n);
      xor_into(recovered, pad_out);
      xor_into(recovered, pad_in);
      l.consumed += n;
    }
  }
  locks.clear();
  if (recovered != key) fail(ErrorCode::kInternal, "relayed key does not match at destination");

  file.octets = std::move(key);
  if (src == dst) {
    place_copy(node(src), file);
  } else {
    place_copy(node(src), file);
    KeyFile far = file;
    far.octets = std::move(recovered);
    place_copy(node(dst), std::move(far));
  }
  return file;
}

bool KeySupply::is_authorized(const std::string& app_id) const {
  std::lock_guard lock(apps_mu_);
  return apps_.count(app_id) > 0;
}

void KeySupply::authorize(const std::string& app_id) {
  std::lock_guard lock(apps_mu_);
  apps_.insert(app_id);
}

void KeySupply::set_audit_sink(std::function<void(const AuditRecord&)> sink) {
  std::lock_guard lock(audit_mu_);
  audit_sink_ = std::move(sink);
}

void KeySupply::emit_audit(AuditRecord record) {
  std::lock_guard lock(audit_mu_);
  if (audit_sink_) audit_sink_(record);
  audit_.push_back(std::move(record));
}

std::vector<AuditRecord> KeySupply::audit_log() const {
  std::lock_guard lock(audit_mu_);
  return audit_;
}

KeyFile KeySupply::ksa_request(const KsaRequest& req) {
  if (!is_authorized(req.app_id)) fail(ErrorCode::kUnauthorized, "application '" + req.app_id + "' is not authorized");
  if (!req.peer_app.empty() && !is_authorized(req.peer_app)) {
    fail(ErrorCode::kUnauthorized, "peer application '" + req.peer_app + "' is not authorized");
  }
  KeyFile file = relay_key(req.local_node, req.peer_node, req.octets);
  file.purpose = req.purpose;
  file.state = KeyState::kReserved;
  file.app_id = req.peer_app;

  {
    Node& peer = node(req.peer_node);
    std::lock_guard lock(peer.mu);
    KeyFile& copy = peer.store.at(file.id);
    copy.state = KeyState::kReserved;
    copy.app_id = req.peer_app;
    copy.purpose = req.purpose;
    if (!peer.dir.empty()) write_key_file(peer.file_for(copy.id), copy);
  }
  if (req.local_node != req.peer_node) {
    Node& local = node(req.local_node);
    std::lock_guard lock(local.mu);
    KeyFile& copy = local.store.at(file.id);
    copy.app_id = req.app_id;
    copy.purpose = req.purpose;
    copy.state = KeyState::kConsumed;
    copy.erase_octets();
    if (!local.dir.empty()) std::filesystem::remove(local.file_for(copy.id));
  }

  AuditRecord rec;
  rec.at = file.created_at;
  rec.event = "deliver";
  rec.key = file.id;
  rec.app_id = req.app_id;
  rec.peer_app = req.peer_app;
  rec.node = req.local_node;
  rec.peer = req.peer_node;
  rec.octets = req.octets;
  rec.purpose = req.purpose;
  emit_audit(std::move(rec));
  return file;
}

KeyFile KeySupply::ksa_fetch(const std::string& app_id, NodeId node_id, const KeyId& id) {
  if (!is_authorized(app_id)) fail(ErrorCode::kUnauthorized, "application '" + app_id + "' is not authorized");
  Node& n = node(node_id);
  const TimeMs now = clock_->now_ms();
  KeyFile out;
  bool expired_now = false;
  {
    std::lock_guard lock(n.mu);
    auto it = n.store.find(id);
    if (it == n.store.end()) fail(ErrorCode::kUnknownKey, "unknown key " + to_string(id));
    KeyFile& copy = it->second;
    if (copy.state == KeyState::kExpired) fail(ErrorCode::kKeyExpired, "key " + to_string(id) + " expired");
    if (copy.state == KeyState::kConsumed) fail(ErrorCode::kKeyConsumed, "key " + to_string(id) + " already consumed");
    if (!copy.app_id.empty() && copy.app_id != app_id) {
      fail(ErrorCode::kUnauthorized, "key " + to_string(id) + " is reserved for another application");
    }
    if (now >= copy.expires_at) {
      copy.state = KeyState::kExpired;
      copy.erase_octets();
      if (!n.dir.empty()) std::filesystem::remove(n.file_for(id));
      expired_now = true;
      out = copy;
    } else {
      out = copy;
      copy.state = KeyState::kConsumed;
      copy.erase_octets();
      if (!n.dir.empty()) std::filesystem::remove(n.file_for(id));
      out.state = KeyState::kConsumed;
    }
  }
  AuditRecord rec;
  rec.at = now;
  rec.event = expired_now ? "expire" : "fetch";
  rec.key = id;
  rec.app_id = app_id;
  rec.node = node_id;
  rec.octets = out.length;
  rec.purpose = out.purpose;
  emit_audit(std::move(rec));
  if (expired_now) fail(ErrorCode::kKeyExpired, "key " + to_string(id) + " expired");
  return out;
}

std::size_t KeySupply::expire_keys(TimeMs now) {
  std::size_t count = 0;
  std::vector<AuditRecord> records;
  for (auto& [nid, n] : nodes_) {
    std::lock_guard lock(n->mu);
    for (auto& [id, copy] : n->store) {
      if ((copy.state == KeyState::kAvailable || copy.state == KeyState::kReserved) && now >= copy.expires_at) {
        copy.state = KeyState::kExpired;
        copy.erase_octets();
        if (!n->dir.empty()) std::filesystem::remove(n->file_for(id));
        ++count;
        AuditRecord rec;
        rec.at = now;
        rec.event = "expire";
        rec.key = id;
        rec.app_id = copy.app_id.empty() ? "-" : copy.app_id;
        rec.node = nid;
        rec.octets = copy.length;
        rec.purpose = copy.purpose;
        records.push_back(std::move(rec));
      }
    }
  }
  for (auto& r : records) emit_audit(std::move(r));
  return count;
}

RoutingTable KeySupply::routing_table() const {
  RoutingTable t;
  t.routes = routes_;
  for (const auto& l : links_) {
    std::lock_guard lock(l->mu);
    t.links.push_back({l->cfg.name, l->cfg.a, l->cfg.b, l->cfg.key_rate, l->cfg.error_rate,
                       static_cast<std::uint64_t>(l->pool_a.size()), l->generated, l->consumed});
  }
  return t;
}

LedgerSnapshot KeySupply::ledger() const {
  LedgerSnapshot s;
  for (const auto& l : links_) {
    std::lock_guard lock(l->mu);
    s.links.push_back({l->cfg.name, l->generated, l->pool_a.size(), l->pool_b.size(), l->consumed, 0});
  }
  s.issued = issued_octets_.load();
  for (const auto& [nid, n] : nodes_) {
    std::lock_guard lock(n->mu);
    for (const auto& [id, copy] : n->store) {
      switch (copy.state) {
        case KeyState::kAvailable:
        case KeyState::kReserved: s.live += copy.length; break;
        case KeyState::kConsumed: s.consumed += copy.length; break;
        case KeyState::kExpired: s.expired += copy.length; break;
      }
    }
  }
  return s;
}

std::uint64_t KeySupply::pool_level(const std::string& name, NodeId n) const {
  const auto idx = link_index(name);
  if (!idx) fail(ErrorCode::kUnknownLink, "unknown link " + name);
  Link& l = link_at(*idx);
  std::lock_guard lock(l.mu);
  return l.pool_of(n).size();
}

std::vector<std::uint8_t> KeySupply::pool_snapshot(const std::string& name, NodeId n) const {
  const auto idx = link_index(name);
  if (!idx) fail(ErrorCode::kUnknownLink, "unknown link " + name);
  Link& l = link_at(*idx);
  std::lock_guard lock(l.mu);
  const auto& pool = l.pool_of(n);
  return {pool.begin(), pool.end()};
}

std::optional<KeyFile> KeySupply::stored_copy(NodeId node_id, const KeyId& id) const {
  Node& n = node(node_id);
  std::lock_guard lock(n.mu);
  auto it = n.store.find(id);
  if (it == n.store.end()) return std::nullopt;
  return it->second;
}

}  // namespace qss
