#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "qss/bundle_store.hpp"
#include "qss/channel.hpp"
#include "qss/key_client.hpp"
#include "qss/messages.hpp"
#include "qss/net.hpp"
#include "qss/scheme.hpp"

namespace qss {

struct ServerConfig {
  std::uint32_t index = 0;
  std::uint32_t n = 0;
  std::uint32_t t = 0;
  PoolMode pool_mode = PoolMode::kPerQuorum;
  // Attempts' worth of sets one precomputation round produces.
  std::uint32_t precompute_batch = 1;
  // Reconstruction attempts admitted per owner per window; 0 disables.
  std::uint32_t rate_limit = 10;
  TimeMs rate_window_ms = 3'600'000;
  // Bundle store directory; empty keeps bundles in memory.
  std::filesystem::path state_dir;
  std::map<std::uint32_t, Endpoint> peers;
};

// Record of one attempt's worth of sets handed out, for consume-once audits.
struct ServedSlot {
  std::string owner_id;
  std::string data_id;
  Quorum pool_key;
  SlotId slot;
  std::uint64_t attempt_id = 0;
};

class StorageServer {
 public:
  StorageServer(ServerConfig config, Connector& connector, KeyClient& keys, std::shared_ptr<const Clock> clock = nullptr);
  ~StorageServer();
  StorageServer(const StorageServer&) = delete;
  StorageServer& operator=(const StorageServer&) = delete;

  // Serves one connection until the peer hangs up.
  void serve(std::unique_ptr<ByteStream> stream);

  std::uint32_t index() const { return config_.index; }
  const ServerConfig& config() const { return config_; }
  const BundleStore& store() const { return store_; }

  // Unconsumed slots in the pool for (owner, data, pool key).
  std::size_t pool_slots(const std::string& owner_id, const std::string& data_id, const Quorum& pool_key) const;
  std::vector<ServedSlot> served_slots() const;
  std::uint64_t rounds_committed() const;
  // Records every pad range this server seals under.
  void set_pad_audit(PadAudit* audit) { audit_ = audit; }

  // Pool key the configured mode uses for a request quorum.
  Quorum pool_key_for(const Quorum& quorum) const;

 private:
  struct Slot {
    SlotId id;
    std::vector<PrecomputedSet> sets;  // blocks 1..l+1
  };
  struct Pool {
    std::deque<Slot> slots;  // ascending SlotId
  };
  struct Staging {
    std::map<std::uint32_t, PrecompContrib> contributions;
  };
  using PoolId = std::tuple<std::string, std::string, Quorum>;
  using StageId = std::tuple<std::string, std::string, Quorum, std::uint64_t>;

  Message dispatch(std::uint16_t peer, const Message& msg, std::string& data_id);
  Ack handle_store(std::uint16_t peer, const StoreShares& msg);
  Ack handle_delete(std::uint16_t peer, const DeleteShares& msg);
  Ack handle_ensure(const PrecompEnsure& msg);
  Ack handle_begin(std::uint16_t peer, const PrecompBegin& msg);
  Ack handle_contrib(std::uint16_t peer, const PrecompContrib& msg);
  Ack handle_commit(std::uint16_t peer, const PrecompDecision& msg);
  Ack handle_abort(std::uint16_t peer, const PrecompDecision& msg);
  ReconResponse handle_reconstruct(std::uint16_t peer, const ReconRequest& msg);

  // Coordinator side of a round; returns the number of slots created.
  std::uint64_t ensure_pool(const std::string& owner_id, const std::string& data_id, const Quorum& key,
                            const SlotId& floor);
  std::uint64_t run_round(const StoredBundle& entry, const Quorum& key);
  void contribute(const StoredBundle& entry, const Quorum& label, std::uint64_t round, std::uint32_t count);
  void stage(const PrecompContrib& contrib);
  std::uint64_t commit(const PrecompDecision& decision);
  std::optional<Slot> bind_slot(const PoolId& id, const SlotId& floor);
  bool has_slot_at_or_above(const PoolId& id, const SlotId& floor) const;
  void admit_attempt(const std::string& owner_id);

  Message rpc(std::uint32_t server, MsgType type, const std::vector<std::uint8_t>& body, const std::string& purpose);
  StoredBundle require_bundle(const std::string& owner_id, const std::string& data_id) const;
  SchemeParams params_for(const StoredBundle& entry) const;
  std::uint64_t next_round();

  ServerConfig config_;
  Connector& connector_;
  KeyClient& keys_;
  std::shared_ptr<const Clock> clock_;
  BundleStore store_;
  PadAudit* audit_ = nullptr;

  mutable std::mutex pools_mu_;
  std::map<PoolId, Pool> pools_;
  std::vector<ServedSlot> served_;
  std::uint64_t rounds_committed_ = 0;

  std::mutex stage_mu_;
  std::map<StageId, Staging> staging_;

  std::mutex rounds_mu_;
  std::map<PoolId, std::shared_ptr<std::mutex>> round_locks_;
  std::uint64_t last_round_ = 0;

  std::mutex rate_mu_;
  std::map<std::string, std::deque<TimeMs>> attempts_;
};

}  // namespace qss
