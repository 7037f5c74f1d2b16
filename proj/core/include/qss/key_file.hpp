#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qss/transport.hpp"

namespace qss {

using NodeId = std::uint16_t;

// Milliseconds since the Unix epoch.
using TimeMs = std::uint64_t;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimeMs now_ms() const = 0;
};

class SystemClock final : public Clock {
 public:
  TimeMs now_ms() const override;
};

class ManualClock final : public Clock {
 public:
  explicit ManualClock(TimeMs start = 1'700'000'000'000ULL) : now_(start) {}
  TimeMs now_ms() const override { return now_.load(); }
  void advance(TimeMs delta) { now_ += delta; }
  void set(TimeMs t) { now_.store(t); }

 private:
  std::atomic<TimeMs> now_;
};

enum class KeyState : std::uint8_t { kAvailable = 0, kReserved = 1, kConsumed = 2, kExpired = 3 };
std::string_view to_string(KeyState state);

// Link-key octets a relay drew, identified by position in the link stream.
struct LinkDraw {
  std::string link;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

struct KeyFile {
  KeyId id{};
  std::vector<NodeId> route;
  // Cleared when the copy is consumed or expires; `length` survives.
  std::vector<std::uint8_t> octets;
  std::uint64_t length = 0;
  TimeMs created_at = 0;
  TimeMs expires_at = 0;
  KeyState state = KeyState::kAvailable;
  // Application the copy is reserved for.
  std::string app_id;
  std::string purpose;
  std::vector<LinkDraw> draws;

  // Overwrites and releases the key octets.
  void erase_octets();
};

// 16-octet id | 8-octet length | octets | metadata trailer.
std::vector<std::uint8_t> encode_key_file(const KeyFile& file);
KeyFile decode_key_file(std::span<const std::uint8_t> bytes);
void write_key_file(const std::filesystem::path& path, const KeyFile& file);
KeyFile read_key_file(const std::filesystem::path& path);

struct AuditRecord {
  TimeMs at = 0;
  // deliver | fetch | expire
  std::string event;
  KeyId key{};
  std::string app_id;
  std::string peer_app;
  NodeId node = 0;
  NodeId peer = 0;
  std::uint64_t octets = 0;
  std::string purpose;
};

// One line, space-separated key=value fields; values never contain spaces.
std::string format_audit_line(const AuditRecord& record);
AuditRecord parse_audit_line(std::string_view line);
std::vector<AuditRecord> read_audit_log(const std::filesystem::path& path);

}  // namespace qss
