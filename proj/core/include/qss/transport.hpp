#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qss/field.hpp"

namespace qss {

using KeyId = std::array<std::uint8_t, 16>;
std::string to_string(const KeyId& id);

inline constexpr std::size_t kMaxPayload = 1500;
inline constexpr std::size_t kFrameHeaderSize = 74;
inline constexpr std::size_t kTagSize = 8;
// One-time (k, b) pair for the universal hash.
inline constexpr std::size_t kTagKeyOctets = 16;
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::array<std::uint8_t, 4> kFrameMagic = {'Q', 'S', 'S', '1'};

// Symmetric key octets shared by both ends of a channel.
struct KeyMaterial {
  KeyId id{};
  std::vector<std::uint8_t> octets;
};

// --- Wegman-Carter one-time authentication -------------------------------

// Hash field used on the wire, GF(2^61 - 1).
const MersennePrime& tag_field();

struct WcKey {
  FieldElement k;
  FieldElement b;

  // Each half is 8 little-endian octets masked to m bits and folded.
  static WcKey from_octets(std::span<const std::uint8_t> octets, const MersennePrime& field);
};

// Splits a message into floor((m - 1) / 8)-octet little-endian blocks (the
// last zero-padded) followed by one block holding the message length.
// An empty message yields no blocks.
std::vector<FieldElement> wc_blocks(std::span<const std::uint8_t> message, const MersennePrime& field);
// b + sum_i m_i k^i.
FieldElement wc_tag_blocks(std::span<const FieldElement> blocks, const WcKey& key);
FieldElement wc_tag(std::span<const std::uint8_t> message, const WcKey& key);
// The 8-octet big-endian wire tag over GF(2^61 - 1).
std::array<std::uint8_t, kTagSize> wc_tag_octets(std::span<const std::uint8_t> message, const WcKey& key);

// --- Frames ----------------------------------------------------------------

struct FrameHeader {
  std::uint8_t version = kFrameVersion;
  std::uint8_t msg_type = 0;
  std::uint16_t sender = 0;
  std::uint64_t session = 0;
  std::uint64_t sequence = 0;
  KeyId enc_key{};
  std::uint64_t enc_offset = 0;
  KeyId mac_key{};
  std::uint64_t mac_offset = 0;
  std::uint16_t payload_length = 0;
};

// magic | version | type | sender | session | sequence | enc id | enc off |
// mac id | mac off | length | ciphertext | tag, integers big-endian.
struct AuthFrame {
  FrameHeader header;
  std::vector<std::uint8_t> ciphertext;
  std::array<std::uint8_t, kTagSize> tag{};

  std::vector<std::uint8_t> encode() const;
  // Header and ciphertext: everything the tag covers.
  std::vector<std::uint8_t> authenticated_bytes() const;

  static FrameHeader decode_header(std::span<const std::uint8_t> header);
  static AuthFrame decode(std::span<const std::uint8_t> bytes);
};

// Next unused octet of one key; offsets only move forward.
class KeystreamCursor {
 public:
  KeystreamCursor() = default;
  explicit KeystreamCursor(std::shared_ptr<const KeyMaterial> key, std::uint64_t offset = 0);

  const KeyId& key_id() const;
  std::uint64_t offset() const { return offset_; }
  std::uint64_t remaining() const;
  bool valid() const { return key_ != nullptr; }

  // Returns the offset of the taken range.
  std::uint64_t take(std::size_t n, std::span<const std::uint8_t>* out);

 private:
  std::shared_ptr<const KeyMaterial> key_;
  std::uint64_t offset_ = 0;
};

// Records every key range a sender consumes so a run can be audited for
// pad reuse. Thread-safe.
class PadAudit {
 public:
  void record(const KeyId& id, std::uint64_t offset, std::uint64_t length);
  // Number of recorded ranges that overlap an earlier range of the same key.
  std::size_t overlaps() const;
  std::uint64_t total_octets() const;
  std::size_t ranges() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::tuple<KeyId, std::uint64_t, std::uint64_t>> ranges_;
  std::uint64_t total_ = 0;
};

struct FrameFields {
  std::uint8_t msg_type = 0;
  std::uint16_t sender = 0;
  std::uint64_t session = 0;
  std::uint64_t sequence = 0;
};

// OTP-encrypts the plaintext and tags header plus ciphertext. Consumes
// plaintext.size() octets from `enc` and 16 from `mac` (which may be the
// same cursor). Nothing is consumed when either cursor is short.
AuthFrame seal(std::span<const std::uint8_t> plaintext, const FrameFields& fields, KeystreamCursor& enc,
               KeystreamCursor& mac, PadAudit* audit = nullptr);

class KeyLookup {
 public:
  virtual ~KeyLookup() = default;
  // Fails with kUnknownKey (or a lifecycle error) when the id is not held.
  // `min_length` is the end of the range the frame needs; derived keys may
  // use it to size themselves, stored keys ignore it.
  virtual std::shared_ptr<const KeyMaterial> find(const KeyId& id, std::uint64_t min_length) = 0;
};

// Disjoint half-open ranges.
class RangeSet {
 public:
  bool overlaps(std::uint64_t begin, std::uint64_t end) const;
  void insert(std::uint64_t begin, std::uint64_t end);
  std::uint64_t covered() const { return covered_; }

 private:
  std::map<std::uint64_t, std::uint64_t> ranges_;
  std::uint64_t covered_ = 0;
};

struct OpenedFrame {
  std::uint8_t msg_type = 0;
  std::uint16_t sender = 0;
  std::uint64_t session = 0;
  std::uint64_t sequence = 0;
  std::vector<std::uint8_t> plaintext;
};

// Receiving side: verifies the tag before releasing any plaintext, rejects
// replays within a (session, sender) stream, and refuses key ranges that an
// earlier accepted frame already used.
class FrameReceiver {
 public:
  explicit FrameReceiver(KeyLookup& keys) : keys_(keys) {}

  OpenedFrame open(const AuthFrame& frame);
  // Octets of `id` accepted so far.
  std::uint64_t used_octets(const KeyId& id) const;

 private:
  KeyLookup& keys_;
  std::map<std::pair<std::uint64_t, std::uint16_t>, std::uint64_t> last_sequence_;
  std::map<KeyId, RangeSet> used_;
};

}  // namespace qss
