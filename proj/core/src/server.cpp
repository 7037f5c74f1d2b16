#include "qss/server.hpp"

#include <algorithm>

#include "qss/error.hpp"

namespace qss {

namespace {

constexpr int kEnsureRounds = 8;

std::string phase_of(MsgType type) {
  switch (type) {
    case MsgType::kStoreShares:
    case MsgType::kDeleteShares: return "register";
    case MsgType::kReconRequest: return "reconstruct";
    default: return "precompute";
  }
}

template <typename T>
Message reply_with(MsgType type, const T& body) {
  return Message{static_cast<std::uint8_t>(type), encode(body)};
}

}  // namespace

StorageServer::StorageServer(ServerConfig config, Connector& connector, KeyClient& keys,
                             std::shared_ptr<const Clock> clock)
    : config_(std::move(config)),
      connector_(connector),
      keys_(keys),
      clock_(clock ? std::move(clock) : std::make_shared<SystemClock>()),
      store_(config_.state_dir) {
  if (config_.index == 0) fail(ErrorCode::kConfig, "server index must be at least 1");
  if (config_.precompute_batch == 0) fail(ErrorCode::kConfig, "precompute batch must be positive");
}

StorageServer::~StorageServer() = default;

Quorum StorageServer::pool_key_for(const Quorum& quorum) const {
  if (config_.pool_mode == PoolMode::kPerQuorum) return quorum;
  Quorum all;
  for (std::uint32_t j = 1; j <= config_.n; ++j) all.push_back(j);
  return all;
}

SchemeParams StorageServer::params_for(const StoredBundle& entry) const {
  return SchemeParams(entry.n, entry.t, MersennePrime::get(entry.m));
}

StoredBundle StorageServer::require_bundle(const std::string& owner_id, const std::string& data_id) const {
  auto entry = store_.get(owner_id, data_id);
  if (!entry) fail(ErrorCode::kUnknownData, "no bundle for data id '" + data_id + "'");
  return std::move(*entry);
}

std::uint64_t StorageServer::next_round() {
  std::lock_guard lock(rounds_mu_);
  last_round_ = std::max(last_round_ + 1, clock_->now_ms() << 10);
  return last_round_;
}

void StorageServer::serve(std::unique_ptr<ByteStream> stream) {
  KsaPads pads(keys_);
  SecureChannel channel(*stream, pads, static_cast<std::uint16_t>(config_.index), std::nullopt, 0, audit_);
  for (;;) {
    Message msg;
    try {
      msg = channel.receive();
    } catch (const Error&) {
      return;
    }
    std::string data_id;
    Message reply;
    try {
      reply = dispatch(*channel.peer(), msg, data_id);
    } catch (const Error& e) {
      reply = reply_with(MsgType::kError, ErrorMsg{e.code(), e.detail()});
    } catch (const std::exception& e) {
      reply = reply_with(MsgType::kError, ErrorMsg{ErrorCode::kInternal, e.what()});
    }
    try {
      // The reply is accounted to the phase of the request it answers.
      channel.send(reply.type, reply.body, purpose_tag(phase_of(static_cast<MsgType>(msg.type)), data_id));
    } catch (const Error&) {
      return;
    }
  }
}

Message StorageServer::dispatch(std::uint16_t peer, const Message& msg, std::string& data_id) {
  switch (static_cast<MsgType>(msg.type)) {
    case MsgType::kStoreShares: {
      const auto m = decode_store_shares(msg.body);
      data_id = m.bundle.data_id;
      return reply_with(MsgType::kAck, handle_store(peer, m));
    }
    case MsgType::kDeleteShares: {
      const auto m = decode_delete_shares(msg.body);
      data_id = m.data_id;
      return reply_with(MsgType::kAck, handle_delete(peer, m));
    }
    case MsgType::kPrecompEnsure: {
      const auto m = decode_precomp_ensure(msg.body);
      data_id = m.data_id;
      return reply_with(MsgType::kAck, handle_ensure(m));
    }
    case MsgType::kPrecompBegin: {
      const auto m = decode_precomp_begin(msg.body);
      data_id = m.data_id;
      return reply_with(MsgType::kAck, handle_begin(peer, m));
    }
    case MsgType::kPrecompContrib: {
      const auto m = decode_precomp_contrib(msg.body);
      data_id = m.data_id;
      return reply_with(MsgType::kAck, handle_contrib(peer, m));
    }
    case MsgType::kPrecompCommit: {
      const auto m = decode_precomp_decision(msg.body);
      data_id = m.data_id;
      return reply_with(MsgType::kAck, handle_commit(peer, m));
    }
    case MsgType::kPrecompAbort: {
      const auto m = decode_precomp_decision(msg.body);
      data_id = m.data_id;
      return reply_with(MsgType::kAck, handle_abort(peer, m));
    }
    case MsgType::kReconRequest: {
      const auto m = decode_recon_request(msg.body);
      data_id = m.data_id;
      return reply_with(MsgType::kReconResponse, handle_reconstruct(peer, m));
    }
    default: fail(ErrorCode::kMalformed, "unsupported message type " + std::to_string(msg.type));
  }
}

// --- registration ------------------------------------------------------------

Ack StorageServer::handle_store(std::uint16_t peer, const StoreShares& msg) {
  if (peer != kOwnerParty) fail(ErrorCode::kUnauthorized, "only the data owner stores bundles");
  const auto& b = msg.bundle;
  if (b.server != config_.index) fail(ErrorCode::kMalformed, "bundle is addressed to another server");
  if (config_.n != 0 && (msg.n != config_.n || msg.t != config_.t)) {
    fail(ErrorCode::kMalformed, "bundle parameters disagree with the server configuration");
  }
  const SchemeParams params(msg.n, msg.t, MersennePrime::get(msg.m));
  params.validate();
  if (b.byte_length == 0) fail(ErrorCode::kMalformed, "bundle describes empty data");
  const std::uint64_t l = block_count(b.byte_length, msg.m);
  if (b.data_shares.size() != l + 1) {
    fail(ErrorCode::kMalformed, "expected " + std::to_string(l + 2) + " shares, got " +
                                    std::to_string(b.data_shares.size() + 1));
  }
  if (b.data_id.empty()) fail(ErrorCode::kMalformed, "data id is empty");
  store_.put({msg.n, msg.t, msg.m, b}, msg.overwrite);
  if (msg.overwrite) {
    std::lock_guard lock(pools_mu_);
    std::erase_if(pools_, [&](const auto& kv) {
      return std::get<0>(kv.first) == b.owner_id && std::get<1>(kv.first) == b.data_id;
    });
  }
  return Ack{l + 1};
}

Ack StorageServer::handle_delete(std::uint16_t peer, const DeleteShares& msg) {
  if (peer != kOwnerParty) fail(ErrorCode::kUnauthorized, "only the data owner deletes bundles");
  const bool erased = store_.erase(msg.owner_id, msg.data_id);
  {
    std::lock_guard lock(pools_mu_);
    std::erase_if(pools_, [&](const auto& kv) {
      return std::get<0>(kv.first) == msg.owner_id && std::get<1>(kv.first) == msg.data_id;
    });
  }
  {
    std::lock_guard lock(stage_mu_);
    std::erase_if(staging_, [&](const auto& kv) {
      return std::get<0>(kv.first) == msg.owner_id && std::get<1>(kv.first) == msg.data_id;
    });
  }
  return Ack{erased ? 1u : 0u};
}

// --- precomputation ----------------------------------------------------------

Ack StorageServer::handle_ensure(const PrecompEnsure& msg) {
  const StoredBundle entry = require_bundle(msg.owner_id, msg.data_id);
  const SchemeParams params = params_for(entry);
  const Quorum key = normalize_quorum(msg.pool_key, params);
  if (config_.pool_mode == PoolMode::kPerQuorum) {
    check_quorum_size(key, params);
  } else if (key != params.all_servers()) {
    fail(ErrorCode::kImproperQuorum, "all-servers pools are keyed by the full server set");
  }
  if (key.front() != config_.index) fail(ErrorCode::kNotMember, "this server does not coordinate that pool");
  return Ack{ensure_pool(msg.owner_id, msg.data_id, key, msg.floor)};
}

std::uint64_t StorageServer::ensure_pool(const std::string& owner_id, const std::string& data_id, const Quorum& key,
                                         const SlotId& floor) {
  const PoolId id{owner_id, data_id, key};
  std::shared_ptr<std::mutex> round_lock;
  {
    std::lock_guard lock(rounds_mu_);
    auto& slot = round_locks_[id];
    if (!slot) slot = std::make_shared<std::mutex>();
    round_lock = slot;
  }
  // A caller arriving during a round waits for it and then finds the pool
  // filled.
  std::lock_guard lock(*round_lock);
  if (has_slot_at_or_above(id, floor)) return 0;
  const StoredBundle entry = require_bundle(owner_id, data_id);
  return run_round(entry, key);
}

std::uint64_t StorageServer::run_round(const StoredBundle& entry, const Quorum& key) {
  const std::uint64_t round = next_round();
  const std::uint32_t count = config_.precompute_batch;
  const auto& owner_id = entry.bundle.owner_id;
  const auto& data_id = entry.bundle.data_id;
  const std::string purpose = purpose_tag("precompute", data_id);
  const PrecompDecision decision{owner_id, data_id, key, round};

  try {
    contribute(entry, key, round, count);
    for (std::uint32_t h : key) {
      if (h == config_.index) continue;
      const Message reply = rpc(h, MsgType::kPrecompBegin, encode(PrecompBegin{owner_id, data_id, key, round, count}),
                                purpose);
      check_reply(reply.type, reply.body, MsgType::kAck);
    }
  } catch (const Error& e) {
    for (std::uint32_t h : key) {
      if (h == config_.index) continue;
      try {
        rpc(h, MsgType::kPrecompAbort, encode(decision), purpose);
      } catch (const Error&) {
      }
    }
    handle_abort(static_cast<std::uint16_t>(config_.index), decision);
    throw Error(e.code() == ErrorCode::kTransport ? ErrorCode::kPeerUnreachable : e.code(),
                "precomputation round aborted: " + e.detail());
  }

  commit(decision);
  std::optional<Error> failure;
  for (std::uint32_t h : key) {
    if (h == config_.index) continue;
    try {
      const Message reply = rpc(h, MsgType::kPrecompCommit, encode(decision), purpose);
      check_reply(reply.type, reply.body, MsgType::kAck);
    } catch (const Error& e) {
      if (!failure) failure = e;
    }
  }
  if (failure) throw Error(ErrorCode::kPeerUnreachable, "commit did not reach every member: " + failure->detail());
  return count;
}

void StorageServer::contribute(const StoredBundle& entry, const Quorum& label, std::uint64_t round,
                               std::uint32_t count) {
  const SchemeParams params = params_for(entry);
  const auto blocks = static_cast<std::uint32_t>(entry.bundle.data_shares.size());
  std::vector<PrecompContrib> out(label.size());
  for (auto& c : out) {
    c.owner_id = entry.bundle.owner_id;
    c.data_id = entry.bundle.data_id;
    c.label = label;
    c.round = round;
    c.contributor = config_.index;
    c.count = count;
    c.blocks = blocks;
    c.m = entry.m;
    c.randomizer.reserve(static_cast<std::size_t>(count) * blocks);
    c.zero.reserve(static_cast<std::size_t>(count) * blocks);
  }
  SystemEntropy entropy;
  for (std::uint32_t s = 0; s < count; ++s) {
    for (std::uint32_t b = 0; b < blocks; ++b) {
      PrecomputedContribution pc = gen_precomputed_contribution(params, label, config_.index, entropy);
      for (std::size_t i = 0; i < label.size(); ++i) {
        out[i].randomizer.push_back(std::move(pc.randomizer_shares[i]));
        out[i].zero.push_back(std::move(pc.zero_shares[i]));
      }
    }
  }
  const std::string purpose = purpose_tag("precompute", entry.bundle.data_id);
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] == config_.index) {
      stage(out[i]);
    } else {
      const Message reply = rpc(label[i], MsgType::kPrecompContrib, encode(out[i]), purpose);
      check_reply(reply.type, reply.body, MsgType::kAck);
    }
  }
}

void StorageServer::stage(const PrecompContrib& contrib) {
  std::lock_guard lock(stage_mu_);
  auto& staging = staging_[StageId{contrib.owner_id, contrib.data_id, contrib.label, contrib.round}];
  if (!staging.contributions.emplace(contrib.contributor, contrib).second) {
    fail(ErrorCode::kDuplicateId, "contribution already staged for this round");
  }
}

Ack StorageServer::handle_begin(std::uint16_t peer, const PrecompBegin& msg) {
  const StoredBundle entry = require_bundle(msg.owner_id, msg.data_id);
  const Quorum label = normalize_quorum(msg.label, params_for(entry));
  if (label.empty() || peer != label.front()) fail(ErrorCode::kUnauthorized, "round begun by a non-coordinator");
  if (!quorum_contains(label, config_.index)) fail(ErrorCode::kNotMember, "this server is not in the round");
  if (msg.count == 0 || msg.count > 4096) fail(ErrorCode::kMalformed, "bad precomputation count");
  contribute(entry, label, msg.round, msg.count);
  return Ack{msg.count};
}

Ack StorageServer::handle_contrib(std::uint16_t peer, const PrecompContrib& msg) {
  if (peer != msg.contributor) fail(ErrorCode::kUnauthorized, "contribution sent on behalf of another server");
  const StoredBundle entry = require_bundle(msg.owner_id, msg.data_id);
  const Quorum label = normalize_quorum(msg.label, params_for(entry));
  if (!quorum_contains(label, msg.contributor) || !quorum_contains(label, config_.index)) {
    fail(ErrorCode::kNotMember, "contribution outside the round's members");
  }
  if (msg.m != entry.m || msg.blocks != entry.bundle.data_shares.size()) {
    fail(ErrorCode::kMalformed, "contribution does not match the stored bundle");
  }
  stage(msg);
  return Ack{0};
}

std::uint64_t StorageServer::commit(const PrecompDecision& d) {
  Staging staged;
  {
    std::lock_guard lock(stage_mu_);
    auto it = staging_.find(StageId{d.owner_id, d.data_id, d.label, d.round});
    if (it == staging_.end() || it->second.contributions.size() != d.label.size()) {
      fail(ErrorCode::kInternal, "round " + std::to_string(d.round) + " is missing contributions");
    }
    staged = std::move(it->second);
    staging_.erase(it);
  }
  const PrecompContrib& first = staged.contributions.begin()->second;
  const std::uint32_t count = first.count;
  const std::uint32_t blocks = first.blocks;
  for (const auto& [h, c] : staged.contributions) {
    if (c.count != count || c.blocks != blocks) fail(ErrorCode::kMalformed, "contributions disagree on shape");
  }

  std::vector<Slot> slots;
  for (std::uint32_t s = 0; s < count; ++s) {
    Slot slot;
    slot.id = SlotId{d.round, s};
    for (std::uint32_t b = 0; b < blocks; ++b) {
      std::vector<FieldElement> r;
      std::vector<FieldElement> z;
      for (std::uint32_t h : d.label) {
        const auto& c = staged.contributions.at(h);
        r.push_back(c.randomizer[static_cast<std::size_t>(s) * blocks + b]);
        z.push_back(c.zero[static_cast<std::size_t>(s) * blocks + b]);
      }
      slot.sets.emplace_back(d.label, b + 1, config_.index, std::move(r), std::move(z));
    }
    slots.push_back(std::move(slot));
  }

  std::lock_guard lock(pools_mu_);
  auto& pool = pools_[PoolId{d.owner_id, d.data_id, d.label}];
  for (auto& s : slots) pool.slots.push_back(std::move(s));
  std::sort(pool.slots.begin(), pool.slots.end(), [](const Slot& a, const Slot& b) { return a.id < b.id; });
  ++rounds_committed_;
  return count;
}

Ack StorageServer::handle_commit(std::uint16_t peer, const PrecompDecision& msg) {
  if (msg.label.empty() || peer != msg.label.front()) fail(ErrorCode::kUnauthorized, "commit from a non-coordinator");
  return Ack{commit(msg)};
}

Ack StorageServer::handle_abort(std::uint16_t, const PrecompDecision& msg) {
  std::lock_guard lock(stage_mu_);
  staging_.erase(StageId{msg.owner_id, msg.data_id, msg.label, msg.round});
  return Ack{0};
}

bool StorageServer::has_slot_at_or_above(const PoolId& id, const SlotId& floor) const {
  std::lock_guard lock(pools_mu_);
  auto it = pools_.find(id);
  if (it == pools_.end()) return false;
  return std::any_of(it->second.slots.begin(), it->second.slots.end(),
                     [&](const Slot& s) { return s.id >= floor; });
}

std::optional<StorageServer::Slot> StorageServer::bind_slot(const PoolId& id, const SlotId& floor) {
  std::lock_guard lock(pools_mu_);
  auto it = pools_.find(id);
  if (it == pools_.end()) return std::nullopt;
  auto& slots = it->second.slots;
  // Slots under the floor were skipped by the other members; never serve them.
  while (!slots.empty() && slots.front().id < floor) slots.pop_front();
  if (slots.empty()) return std::nullopt;
  Slot s = std::move(slots.front());
  slots.pop_front();
  return s;
}

std::size_t StorageServer::pool_slots(const std::string& owner_id, const std::string& data_id,
                                      const Quorum& pool_key) const {
  std::lock_guard lock(pools_mu_);
  auto it = pools_.find(PoolId{owner_id, data_id, pool_key});
  return it == pools_.end() ? 0 : it->second.slots.size();
}

std::vector<ServedSlot> StorageServer::served_slots() const {
  std::lock_guard lock(pools_mu_);
  return served_;
}

std::uint64_t StorageServer::rounds_committed() const {
  std::lock_guard lock(pools_mu_);
  return rounds_committed_;
}

// --- reconstruction ----------------------------------------------------------

void StorageServer::admit_attempt(const std::string& owner_id) {
  if (config_.rate_limit == 0) return;
  const TimeMs now = clock_->now_ms();
  std::lock_guard lock(rate_mu_);
  auto& log = attempts_[owner_id];
  while (!log.empty() && log.front() + config_.rate_window_ms <= now) log.pop_front();
  if (log.size() >= config_.rate_limit) {
    fail(ErrorCode::kRateLimited, "owner '" + owner_id + "' exceeded " + std::to_string(config_.rate_limit) +
                                      " attempts per window");
  }
  log.push_back(now);
}

ReconResponse StorageServer::handle_reconstruct(std::uint16_t peer, const ReconRequest& msg) {
  if (peer != kOwnerParty) fail(ErrorCode::kUnauthorized, "only the data owner reconstructs");
  const StoredBundle entry = require_bundle(msg.owner_id, msg.data_id);
  const SchemeParams params = params_for(entry);
  if (msg.m != entry.m) fail(ErrorCode::kFieldMismatch, "request uses another field");
  // Improper requests are refused before any pool material is bound.
  check_quorum_size(msg.quorum, params);
  const Quorum quorum = normalize_quorum(msg.quorum, params);
  if (!quorum_contains(quorum, config_.index)) fail(ErrorCode::kNotMember, "this server is not in the quorum");
  admit_attempt(msg.owner_id);

  const Quorum key = pool_key_for(quorum);
  const PoolId id{msg.owner_id, msg.data_id, key};
  auto slot = bind_slot(id, msg.floor);
  // Empty pool: run (or ask the coordinator for) a round, then serve.
  // Concurrent attempts may drain a fresh round first, so retry a few times.
  for (int round = 0; !slot && round < kEnsureRounds; ++round) {
    if (key.front() == config_.index) {
      ensure_pool(msg.owner_id, msg.data_id, key, msg.floor);
    } else {
      const Message reply = rpc(key.front(), MsgType::kPrecompEnsure,
                                encode(PrecompEnsure{msg.owner_id, msg.data_id, key, msg.floor}),
                                purpose_tag("precompute", msg.data_id));
      check_reply(reply.type, reply.body, MsgType::kAck);
    }
    slot = bind_slot(id, msg.floor);
  }
  if (!slot) fail(ErrorCode::kPoolExhausted, "no precomputed sets available");

  ReconstructionRequest req;
  req.quorum = quorum;
  req.point = config_.index;
  req.password_share = msg.password_share;
  req.data_id = msg.data_id;
  req.attempt_id = msg.attempt_id;

  ReconResponse out;
  out.slot = slot->id;
  out.point = config_.index;
  out.byte_length = entry.bundle.byte_length;
  out.m = entry.m;
  out.values.reserve(slot->sets.size());
  for (std::uint32_t b = 1; b <= slot->sets.size(); ++b) {
    out.values.push_back(respond(params, entry.bundle, slot->sets[b - 1], req, b));
  }
  {
    std::lock_guard lock(pools_mu_);
    served_.push_back({msg.owner_id, msg.data_id, key, slot->id, msg.attempt_id});
  }
  return out;
}

Message StorageServer::rpc(std::uint32_t server, MsgType type, const std::vector<std::uint8_t>& body,
                           const std::string& purpose) {
  auto it = config_.peers.find(server);
  if (it == config_.peers.end()) fail(ErrorCode::kPeerUnreachable, "no endpoint for server " + std::to_string(server));
  auto stream = connector_.connect(it->second);
  KsaPads pads(keys_);
  SecureChannel channel(*stream, pads, static_cast<std::uint16_t>(config_.index), static_cast<std::uint16_t>(server),
                        SecureChannel::fresh_session(), audit_);
  try {
    channel.send(static_cast<std::uint8_t>(type), body, purpose);
    Message reply = channel.receive();
    stream->close();
    return reply;
  } catch (const Error& e) {
    stream->close();
    if (e.code() == ErrorCode::kTransport) throw Error(ErrorCode::kPeerUnreachable, e.detail());
    throw;
  }
}

}  // namespace qss
