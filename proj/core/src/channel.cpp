#include "qss/channel.hpp"

#include "qss/entropy.hpp"
#include "qss/error.hpp"
#include "qss/wire.hpp"

namespace qss {

std::string app_for_party(std::uint16_t party) {
  if (party == kOwnerParty) return "owner";
  if (party == kKeydParty) return "keyd";
  return "server-" + std::to_string(party);
}

Party Directory::resolve(std::uint16_t party) const {
  Party p;
  p.id = party;
  p.app = app_for_party(party);
  if (party == kOwnerParty) {
    p.node = owner_node;
  } else if (auto it = server_nodes.find(party); it != server_nodes.end()) {
    p.node = it->second;
  } else {
    p.node = static_cast<NodeId>(party);
  }
  return p;
}

std::string purpose_tag(std::string_view phase, std::string_view data_id) {
  std::string out(phase);
  out += ':';
  out += data_id;
  return out;
}

std::string purpose_phase(std::string_view purpose) {
  return std::string(purpose.substr(0, purpose.find(':')));
}

// --- bootstrap pads ----------------------------------------------------------

BootstrapPads::BootstrapPads(std::vector<std::uint8_t> secret, std::uint16_t app_party, bool at_keyd,
                             std::uint64_t session)
    : secret_(std::move(secret)), app_party_(app_party), at_keyd_(at_keyd), session_(session) {
  if (secret_.empty()) fail(ErrorCode::kConfig, "bootstrap secret is empty");
}

KeyId BootstrapPads::make_id(std::uint16_t app_party, std::uint64_t session, std::uint32_t counter, bool from_keyd) {
  ByteWriter w;
  w.u8(0xB0);
  w.u16(app_party);
  w.u64(session);
  w.u32(counter);
  w.u8(from_keyd ? 1 : 0);
  KeyId id{};
  const auto& bytes = w.data();
  std::copy(bytes.begin(), bytes.end(), id.begin());
  return id;
}

std::vector<std::uint8_t> BootstrapPads::derive(std::span<const std::uint8_t> secret, const KeyId& id,
                                                std::uint64_t length) {
  std::vector<std::uint8_t> material(secret.begin(), secret.end());
  material.insert(material.end(), id.begin(), id.end());
  ChaChaEntropy stream(ChaChaEntropy::derive_key(material), 0);
  std::fill(material.begin(), material.end(), std::uint8_t{0});
  std::vector<std::uint8_t> out(length);
  stream.fill(out);
  return out;
}

std::shared_ptr<const KeyMaterial> BootstrapPads::allocate(std::uint16_t, std::uint64_t octets, const std::string&) {
  if (session_ == 0) fail(ErrorCode::kInternal, "bootstrap session not established");
  auto key = std::make_shared<KeyMaterial>();
  key->id = make_id(app_party_, session_, counter_++, at_keyd_);
  key->octets = derive(secret_, key->id, octets);
  return key;
}

std::shared_ptr<const KeyMaterial> BootstrapPads::lookup(std::uint16_t peer, const KeyId& id,
                                                         std::uint64_t min_length) {
  ByteReader r(id);
  const std::uint8_t tag = r.u8();
  const std::uint16_t party = r.u16();
  const std::uint64_t session = r.u64();
  r.u32();
  const bool from_keyd = r.u8() == 1;
  if (tag != 0xB0) fail(ErrorCode::kUnknownKey, "not a bootstrap key id");
  if (from_keyd == at_keyd_) fail(ErrorCode::kUnauthorized, "bootstrap key points the wrong way");
  const std::uint16_t expected_party = at_keyd_ ? peer : app_party_;
  if (party != expected_party) fail(ErrorCode::kUnauthorized, "bootstrap key belongs to another party");
  if (at_keyd_) {
    if (session_ == 0) session_ = session;
    app_party_ = party;
  }
  if (session != session_) fail(ErrorCode::kUnauthorized, "bootstrap key from another session");
  if (min_length > (1ULL << 26)) fail(ErrorCode::kMalformed, "bootstrap key range too long");
  auto key = std::make_shared<KeyMaterial>();
  key->id = id;
  key->octets = derive(secret_, id, min_length);
  return key;
}

// --- channel -----------------------------------------------------------------

std::size_t message_frame_count(std::size_t body_length) {
  return body_length == 0 ? 1 : (body_length + kChunkData - 1) / kChunkData;
}

std::uint64_t message_key_octets(std::size_t body_length) {
  const std::size_t frames = message_frame_count(body_length);
  return body_length + frames * (kChunkHeader + kTagKeyOctets);
}

// Resolves key ids through the pad provider and keeps each key for the rest
// of the message it belongs to.
class SecureChannel::Lookup final : public KeyLookup {
 public:
  explicit Lookup(SecureChannel& ch) : ch_(ch) {}

  std::shared_ptr<const KeyMaterial> find(const KeyId& id, std::uint64_t min_length) override {
    auto it = cache_.find(id);
    if (it != cache_.end() && it->second->octets.size() >= min_length) return it->second;
    if (!ch_.peer_) fail(ErrorCode::kInternal, "peer unknown");
    // Stored keys are fetched once; derived keys are re-derived longer.
    if (it != cache_.end() && it->second->id[0] != 0xB0) return it->second;
    auto key = ch_.pads_.lookup(*ch_.peer_, id, min_length);
    cache_[id] = key;
    return key;
  }

  void clear() { cache_.clear(); }

 private:
  SecureChannel& ch_;
  std::map<KeyId, std::shared_ptr<const KeyMaterial>> cache_;
};

SecureChannel::SecureChannel(ByteStream& stream, PadProvider& pads, std::uint16_t self,
                             std::optional<std::uint16_t> peer, std::uint64_t session, PadAudit* audit)
    : stream_(stream), pads_(pads), self_(self), peer_(peer), session_(session), audit_(audit) {
  lookup_ = std::make_unique<Lookup>(*this);
  receiver_ = std::make_unique<FrameReceiver>(*lookup_);
}

SecureChannel::~SecureChannel() = default;

std::uint64_t SecureChannel::fresh_session() {
  SystemEntropy os;
  std::uint64_t s = 0;
  while (s == 0) s = os.next_u64();
  return s;
}

void SecureChannel::send(std::uint8_t type, std::span<const std::uint8_t> body, const std::string& purpose) {
  if (!peer_) fail(ErrorCode::kInternal, "cannot send before the peer is known");
  if (session_ == 0) fail(ErrorCode::kInternal, "cannot send before the session is known");
  const std::size_t frames = message_frame_count(body.size());
  if (frames > 0xFFFF) fail(ErrorCode::kPayloadTooLarge, "message needs more than 65535 frames");
  const std::uint64_t need = message_key_octets(body.size());
  auto key = pads_.allocate(*peer_, need, purpose);
  KeystreamCursor cursor(key);

  ByteWriter out;
  std::vector<std::uint8_t> payload;
  for (std::size_t i = 0; i < frames; ++i) {
    const std::size_t begin = i * kChunkData;
    const std::size_t len = std::min(kChunkData, body.size() - std::min(body.size(), begin));
    payload.clear();
    payload.push_back(static_cast<std::uint8_t>(i >> 8));
    payload.push_back(static_cast<std::uint8_t>(i));
    payload.push_back(static_cast<std::uint8_t>(frames >> 8));
    payload.push_back(static_cast<std::uint8_t>(frames));
    payload.insert(payload.end(), body.begin() + static_cast<std::ptrdiff_t>(begin),
                   body.begin() + static_cast<std::ptrdiff_t>(begin + len));
    FrameFields f{type, self_, session_, next_sequence_++};
    out.bytes(seal(payload, f, cursor, cursor, audit_).encode());
  }
  std::fill(payload.begin(), payload.end(), std::uint8_t{0});
  stream_.write(out.data());
  key_octets_sent_ += need;
}

AuthFrame SecureChannel::read_frame() {
  std::vector<std::uint8_t> bytes(kFrameHeaderSize);
  stream_.read_exact(bytes);
  const FrameHeader h = AuthFrame::decode_header(bytes);
  bytes.resize(kFrameHeaderSize + h.payload_length + kTagSize);
  stream_.read_exact(std::span<std::uint8_t>(bytes).subspan(kFrameHeaderSize));
  return AuthFrame::decode(bytes);
}

Message SecureChannel::receive() {
  Message msg;
  std::size_t expected_count = 0;
  for (std::size_t index = 0;; ++index) {
    const AuthFrame frame = read_frame();
    const FrameHeader& h = frame.header;
    if (h.sender == self_) fail(ErrorCode::kUnauthorized, "frame claims to come from ourselves");
    if (!peer_) peer_ = h.sender;
    if (h.sender != *peer_) fail(ErrorCode::kUnauthorized, "frame from unexpected sender " + std::to_string(h.sender));
    if (session_ == 0) session_ = h.session;
    if (h.session != session_) fail(ErrorCode::kMalformed, "frame from another session");

    OpenedFrame opened = receiver_->open(frame);
    if (opened.plaintext.size() < kChunkHeader) fail(ErrorCode::kMalformed, "frame lacks chunk header");
    const std::size_t idx = (std::size_t{opened.plaintext[0]} << 8) | opened.plaintext[1];
    const std::size_t count = (std::size_t{opened.plaintext[2]} << 8) | opened.plaintext[3];
    if (index == 0) {
      if (count == 0) fail(ErrorCode::kMalformed, "zero chunk count");
      expected_count = count;
      msg.type = opened.msg_type;
    } else if (count != expected_count || opened.msg_type != msg.type) {
      fail(ErrorCode::kMalformed, "chunk belongs to another message");
    }
    if (idx != index) fail(ErrorCode::kMalformed, "chunks out of order");
    msg.body.insert(msg.body.end(), opened.plaintext.begin() + kChunkHeader, opened.plaintext.end());
    std::fill(opened.plaintext.begin(), opened.plaintext.end(), std::uint8_t{0});
    if (idx + 1 == expected_count) break;
  }
  lookup_->clear();
  return msg;
}

}  // namespace qss
