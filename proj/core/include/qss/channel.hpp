#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "qss/key_file.hpp"
#include "qss/net.hpp"
#include "qss/transport.hpp"

namespace qss {

inline constexpr std::uint16_t kOwnerParty = 0;
inline constexpr std::uint16_t kKeydParty = 0xFFFF;

// A protocol participant: its frame sender id, its application id at the
// key supply, and the node hosting it.
struct Party {
  std::uint16_t id = 0;
  std::string app;
  NodeId node = 0;
};

std::string app_for_party(std::uint16_t party);

// Maps party ids to nodes. Server j defaults to node j.
struct Directory {
  NodeId owner_node = 1;
  std::map<std::uint16_t, NodeId> server_nodes;

  Party resolve(std::uint16_t party) const;
  Party owner() const { return resolve(kOwnerParty); }
  Party server(std::uint32_t j) const { return resolve(static_cast<std::uint16_t>(j)); }
};

// "<phase>:<data id>", carried to the key supply for the audit trail.
std::string purpose_tag(std::string_view phase, std::string_view data_id);
// Phase part of a purpose tag.
std::string purpose_phase(std::string_view purpose);

// Supplies one-time key material for a channel.
class PadProvider {
 public:
  virtual ~PadProvider() = default;
  // Fresh key shared with `peer`, at least `octets` long.
  virtual std::shared_ptr<const KeyMaterial> allocate(std::uint16_t peer, std::uint64_t octets,
                                                      const std::string& purpose) = 0;
  // The receiving side's copy of a key the peer allocated.
  virtual std::shared_ptr<const KeyMaterial> lookup(std::uint16_t peer, const KeyId& id,
                                                    std::uint64_t min_length) = 0;
};

// Pads for the channel between an application and its key supply daemon.
// Both ends derive the pad from a pre-provisioned secret and the key id
// [0xB0 | party | session | counter | direction], so no key supply is
// needed to reach the key supply.
class BootstrapPads final : public PadProvider {
 public:
  // `app_party` is the application's party id; `at_keyd` selects the side.
  BootstrapPads(std::vector<std::uint8_t> secret, std::uint16_t app_party, bool at_keyd, std::uint64_t session);

  std::shared_ptr<const KeyMaterial> allocate(std::uint16_t peer, std::uint64_t octets,
                                              const std::string& purpose) override;
  std::shared_ptr<const KeyMaterial> lookup(std::uint16_t peer, const KeyId& id, std::uint64_t min_length) override;

  std::uint64_t session() const { return session_; }
  std::uint16_t app_party() const { return app_party_; }

  static KeyId make_id(std::uint16_t app_party, std::uint64_t session, std::uint32_t counter, bool from_keyd);
  static std::vector<std::uint8_t> derive(std::span<const std::uint8_t> secret, const KeyId& id, std::uint64_t length);

 private:
  std::vector<std::uint8_t> secret_;
  std::uint16_t app_party_;
  bool at_keyd_;
  std::uint64_t session_;
  std::uint32_t counter_ = 0;
};

struct Message {
  std::uint8_t type = 0;
  std::vector<std::uint8_t> body;
};

// Messages are split into frames carrying a 4-octet chunk header
// (index, count) and at most this many body octets.
inline constexpr std::size_t kChunkHeader = 4;
inline constexpr std::size_t kChunkData = kMaxPayload - kChunkHeader;

std::size_t message_frame_count(std::size_t body_length);
// Key octets one message consumes: every frame's payload plus its tag key.
std::uint64_t message_key_octets(std::size_t body_length);

// OTP-encrypted, authenticated message stream over one connection. Each
// message is sealed under one freshly allocated key.
class SecureChannel {
 public:
  // With session == 0 the channel adopts the session of the first frame
  // received (server side); with no peer it adopts the first sender.
  SecureChannel(ByteStream& stream, PadProvider& pads, std::uint16_t self, std::optional<std::uint16_t> peer,
                std::uint64_t session, PadAudit* audit = nullptr);
  ~SecureChannel();
  SecureChannel(const SecureChannel&) = delete;
  SecureChannel& operator=(const SecureChannel&) = delete;

  void send(std::uint8_t type, std::span<const std::uint8_t> body, const std::string& purpose);
  Message receive();

  std::optional<std::uint16_t> peer() const { return peer_; }
  std::uint64_t session() const { return session_; }
  std::uint64_t key_octets_sent() const { return key_octets_sent_; }

  static std::uint64_t fresh_session();

 private:
  class Lookup;
  AuthFrame read_frame();

  ByteStream& stream_;
  PadProvider& pads_;
  std::uint16_t self_;
  std::optional<std::uint16_t> peer_;
  std::uint64_t session_;
  PadAudit* audit_;
  std::uint64_t next_sequence_ = 1;
  std::uint64_t key_octets_sent_ = 0;
  std::unique_ptr<Lookup> lookup_;
  std::unique_ptr<FrameReceiver> receiver_;
};

}  // namespace qss
