#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qss/config.hpp"
#include "qss/key_client.hpp"
#include "qss/messages.hpp"
#include "qss/net.hpp"

namespace qss {

// What the owner remembers per data id: its size and the lowest pool slot
// a future attempt may use.
struct OwnedData {
  std::uint64_t byte_length = 0;
  SlotId floor;
};

// Owner-side bookkeeping, optionally persisted as "<data id> <size> <round> <slot>" lines.
class OwnerState {
 public:
  OwnerState() = default;
  explicit OwnerState(std::filesystem::path file);

  std::optional<OwnedData> get(const std::string& data_id) const;
  void put(const std::string& data_id, const OwnedData& entry);
  void erase(const std::string& data_id);
  std::map<std::string, OwnedData> entries() const;

 private:
  void save() const;

  std::filesystem::path file_;
  mutable std::mutex mu_;
  std::map<std::string, OwnedData> entries_;
};

struct RegisterResult {
  std::string data_id;
  std::uint64_t byte_length = 0;
  std::uint64_t blocks = 0;
};

struct ReconstructOptions {
  // Explicit quorum; by default the 2t + 1 lowest-indexed reachable servers.
  std::optional<Quorum> quorum;
  std::uint32_t max_attempts = 5;
  // Ask the pool coordinator to precompute before sending the requests.
  bool ensure_first = true;
};

struct ReconstructResult {
  std::vector<std::uint8_t> data;
  Quorum quorum;
  SlotId slot;
  std::uint32_t attempts = 0;
};

// Wall-clock split of one reconstruction, for benchmarks.
struct PhaseTimes {
  double precompute_s = 0;
  double reconstruct_s = 0;
};

class OwnerClient {
 public:
  OwnerClient(Config config, Connector& connector, KeyClient& keys, OwnerState* state = nullptr);

  // Shares `data` across all n servers. All-or-nothing: if any server
  // refuses, the bundles already stored are deleted again and the error is
  // rethrown. The passphrase is checked before any traffic.
  RegisterResult register_data(std::span<const std::uint8_t> data, std::string_view passphrase,
                               std::optional<std::string> data_id = std::nullopt, bool overwrite = false);

  // Runs request-response with a quorum and verifies the MAC. Wrong
  // passwords and tampering both surface as kAuthenticationFailed.
  ReconstructResult reconstruct(const std::string& data_id, std::string_view passphrase,
                                const ReconstructOptions& options = {}, PhaseTimes* times = nullptr);

  // Deletes the bundles everywhere; returns the number of servers that held one.
  std::uint32_t remove(const std::string& data_id);

  void set_pad_audit(PadAudit* audit) { audit_ = audit; }
  const Config& config() const { return config_; }

  static std::string fresh_data_id();

 private:
  Message call(std::uint32_t server, MsgType type, const std::vector<std::uint8_t>& body, const std::string& purpose);
  Quorum pick_quorum(const std::vector<std::uint32_t>& excluded) const;
  Quorum pool_key_for(const Quorum& quorum) const;

  Config config_;
  SchemeParams params_;
  Connector& connector_;
  KeyClient& keys_;
  OwnerState* state_;
  OwnerState scratch_;
  PadAudit* audit_ = nullptr;
};

// Key octets delivered by the key supply, grouped by protocol phase.
struct KeyStats {
  std::map<std::string, std::uint64_t> by_phase;
  std::map<std::string, std::map<std::string, std::uint64_t>> by_data;
  std::uint64_t total = 0;
  std::uint64_t data_bytes = 0;

  double ratio() const { return data_bytes == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(data_bytes); }
};

// Sums "deliver" records of the storage phases. `sizes` maps data ids to
// their registered size; only those ids count towards data_bytes.
KeyStats key_stats(std::span<const AuditRecord> records, const std::map<std::string, std::uint64_t>& sizes);
std::string format_key_stats(const KeyStats& stats);

// Process exit status for an error: 2 authentication failure, 3 transport
// or key exhaustion, 4 usage, 1 anything else.
int exit_code_for(ErrorCode code);

// PASS_STORE_PW if set, otherwise a no-echo prompt on the terminal.
std::string obtain_passphrase(const std::string& prompt);

}  // namespace qss
