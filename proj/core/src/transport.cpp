#include "qss/transport.hpp"

#include <algorithm>
#include <tuple>

#include "qss/error.hpp"
#include "qss/wire.hpp"

namespace qss {

std::string to_string(const KeyId& id) { return to_hex(id); }

const MersennePrime& tag_field() {
  static const MersennePrime& f = MersennePrime::get(61);
  return f;
}

WcKey WcKey::from_octets(std::span<const std::uint8_t> octets, const MersennePrime& field) {
  if (octets.size() != kTagKeyOctets) fail(ErrorCode::kInvalidArgument, "tag key needs 16 octets");
  auto half = [&](std::span<const std::uint8_t> h) {
    mpz_class v;
    mpz_import(v.get_mpz_t(), h.size(), -1, 1, 0, 0, h.data());
    mpz_tdiv_r_2exp(v.get_mpz_t(), v.get_mpz_t(), field.exponent());
    return field.reduce(v);
  };
  return WcKey{half(octets.subspan(0, 8)), half(octets.subspan(8, 8))};
}

std::vector<FieldElement> wc_blocks(std::span<const std::uint8_t> message, const MersennePrime& field) {
  std::vector<FieldElement> blocks;
  if (message.empty()) return blocks;
  const std::size_t width = (field.exponent() - 1) / 8;
  if (width == 0) fail(ErrorCode::kInvalidArgument, "field too small for octet blocks");
  blocks.reserve(message.size() / width + 2);
  mpz_class v;
  for (std::size_t at = 0; at < message.size(); at += width) {
    const std::size_t n = std::min(width, message.size() - at);
    mpz_import(v.get_mpz_t(), n, -1, 1, 0, 0, message.data() + at);
    blocks.push_back(field.element(v));
  }
  blocks.push_back(field.reduce(mpz_class(static_cast<unsigned long>(message.size()))));
  return blocks;
}

FieldElement wc_tag_blocks(std::span<const FieldElement> blocks, const WcKey& key) {
  FieldElement acc = key.k.field().zero();
  for (std::size_t i = blocks.size(); i-- > 0;) {
    acc += blocks[i];
    acc *= key.k;
  }
  return acc + key.b;
}

FieldElement wc_tag(std::span<const std::uint8_t> message, const WcKey& key) {
  const auto blocks = wc_blocks(message, key.k.field());
  return wc_tag_blocks(blocks, key);
}

std::array<std::uint8_t, kTagSize> wc_tag_octets(std::span<const std::uint8_t> message, const WcKey& key) {
  if (key.k.field() != tag_field()) fail(ErrorCode::kFieldMismatch, "wire tags use GF(2^61 - 1)");
  const std::uint64_t v = wc_tag(message, key).to_u64();
  std::array<std::uint8_t, kTagSize> out{};
  for (std::size_t i = 0; i < kTagSize; ++i) out[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
  return out;
}

std::vector<std::uint8_t> AuthFrame::authenticated_bytes() const {
  ByteWriter w;
  w.bytes(kFrameMagic);
  w.u8(header.version);
  w.u8(header.msg_type);
  w.u16(header.sender);
  w.u64(header.session);
  w.u64(header.sequence);
  w.bytes(header.enc_key);
  w.u64(header.enc_offset);
  w.bytes(header.mac_key);
  w.u64(header.mac_offset);
  w.u16(header.payload_length);
  w.bytes(ciphertext);
  return w.take();
}

std::vector<std::uint8_t> AuthFrame::encode() const {
  auto out = authenticated_bytes();
  out.insert(out.end(), tag.begin(), tag.end());
  return out;
}

FrameHeader AuthFrame::decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) fail(ErrorCode::kMalformed, "truncated frame header");
  ByteReader r(bytes.subspan(0, kFrameHeaderSize));
  auto magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), kFrameMagic.begin())) fail(ErrorCode::kMalformed, "bad frame magic");
  FrameHeader h;
  h.version = r.u8();
  if (h.version != kFrameVersion) fail(ErrorCode::kMalformed, "unsupported frame version");
  h.msg_type = r.u8();
  h.sender = r.u16();
  h.session = r.u64();
  h.sequence = r.u64();
  auto enc = r.bytes(16);
  std::copy(enc.begin(), enc.end(), h.enc_key.begin());
  h.enc_offset = r.u64();
  auto mac = r.bytes(16);
  std::copy(mac.begin(), mac.end(), h.mac_key.begin());
  h.mac_offset = r.u64();
  h.payload_length = r.u16();
  if (h.payload_length > kMaxPayload) fail(ErrorCode::kPayloadTooLarge, "frame payload exceeds 1500 octets");
  return h;
}

AuthFrame AuthFrame::decode(std::span<const std::uint8_t> bytes) {
  AuthFrame f;
  f.header = decode_header(bytes);
  const std::size_t total = kFrameHeaderSize + f.header.payload_length + kTagSize;
  if (bytes.size() != total) fail(ErrorCode::kMalformed, "frame length does not match its header");
  auto ct = bytes.subspan(kFrameHeaderSize, f.header.payload_length);
  f.ciphertext.assign(ct.begin(), ct.end());
  auto tag = bytes.subspan(kFrameHeaderSize + f.header.payload_length, kTagSize);
  std::copy(tag.begin(), tag.end(), f.tag.begin());
  return f;
}

KeystreamCursor::KeystreamCursor(std::shared_ptr<const KeyMaterial> key, std::uint64_t offset)
    : key_(std::move(key)), offset_(offset) {
  if (!key_) fail(ErrorCode::kInvalidArgument, "cursor needs key material");
  if (offset_ > key_->octets.size()) fail(ErrorCode::kOutOfRange, "cursor offset beyond key length");
}

const KeyId& KeystreamCursor::key_id() const {
  if (!key_) fail(ErrorCode::kInvalidArgument, "empty cursor");
  return key_->id;
}

std::uint64_t KeystreamCursor::remaining() const { return key_ ? key_->octets.size() - offset_ : 0; }

std::uint64_t KeystreamCursor::take(std::size_t n, std::span<const std::uint8_t>* out) {
  if (remaining() < n) fail(ErrorCode::kKeyExhausted, "cursor has " + std::to_string(remaining()) + " octets left");
  const std::uint64_t at = offset_;
  if (out) *out = std::span<const std::uint8_t>(key_->octets.data() + at, n);
  offset_ += n;
  return at;
}

void PadAudit::record(const KeyId& id, std::uint64_t offset, std::uint64_t length) {
  std::lock_guard lock(mu_);
  ranges_.emplace_back(id, offset, length);
  total_ += length;
}

std::size_t PadAudit::overlaps() const {
  std::lock_guard lock(mu_);
  std::map<KeyId, RangeSet> seen;
  std::size_t bad = 0;
  for (const auto& [id, offset, length] : ranges_) {
    auto& set = seen[id];
    if (set.overlaps(offset, offset + length)) {
      ++bad;
    } else {
      set.insert(offset, offset + length);
    }
  }
  return bad;
}

std::uint64_t PadAudit::total_octets() const {
  std::lock_guard lock(mu_);
  return total_;
}

std::size_t PadAudit::ranges() const {
  std::lock_guard lock(mu_);
  return ranges_.size();
}

AuthFrame seal(std::span<const std::uint8_t> plaintext, const FrameFields& fields, KeystreamCursor& enc,
               KeystreamCursor& mac, PadAudit* audit) {
  if (plaintext.size() > kMaxPayload) fail(ErrorCode::kPayloadTooLarge, "payload exceeds 1500 octets");
  if (&enc == &mac) {
    if (enc.remaining() < plaintext.size() + kTagKeyOctets) {
      fail(ErrorCode::kKeyExhausted, "not enough key material for payload and tag");
    }
  } else if (enc.remaining() < plaintext.size() || mac.remaining() < kTagKeyOctets) {
    fail(ErrorCode::kKeyExhausted, "not enough key material for payload and tag");
  }

  AuthFrame frame;
  frame.header.msg_type = fields.msg_type;
  frame.header.sender = fields.sender;
  frame.header.session = fields.session;
  frame.header.sequence = fields.sequence;
  frame.header.payload_length = static_cast<std::uint16_t>(plaintext.size());

  std::span<const std::uint8_t> pad;
  frame.header.enc_key = enc.key_id();
  frame.header.enc_offset = enc.take(plaintext.size(), &pad);
  frame.ciphertext.resize(plaintext.size());
  for (std::size_t i = 0; i < plaintext.size(); ++i) frame.ciphertext[i] = plaintext[i] ^ pad[i];

  std::span<const std::uint8_t> tag_key;
  frame.header.mac_key = mac.key_id();
  frame.header.mac_offset = mac.take(kTagKeyOctets, &tag_key);
  frame.tag = wc_tag_octets(frame.authenticated_bytes(), WcKey::from_octets(tag_key, tag_field()));

  if (audit) {
    if (!plaintext.empty()) audit->record(frame.header.enc_key, frame.header.enc_offset, plaintext.size());
    audit->record(frame.header.mac_key, frame.header.mac_offset, kTagKeyOctets);
  }
  return frame;
}

bool RangeSet::overlaps(std::uint64_t begin, std::uint64_t end) const {
  if (begin >= end) return false;
  auto it = ranges_.upper_bound(begin);
  if (it != ranges_.begin()) {
    auto prev = std::prev(it);
    if (prev->second > begin) return true;
  }
  return it != ranges_.end() && it->first < end;
}

void RangeSet::insert(std::uint64_t begin, std::uint64_t end) {
  if (begin >= end) return;
  ranges_[begin] = end;
  covered_ += end - begin;
}

OpenedFrame FrameReceiver::open(const AuthFrame& frame) {
  const FrameHeader& h = frame.header;
  if (h.payload_length != frame.ciphertext.size()) fail(ErrorCode::kMalformed, "payload length mismatch");

  const auto stream = std::make_pair(h.session, h.sender);
  if (auto it = last_sequence_.find(stream); it != last_sequence_.end() && h.sequence <= it->second) {
    fail(ErrorCode::kReplay, "sequence " + std::to_string(h.sequence) + " already seen in this session");
  }

  const std::uint64_t enc_end = h.enc_offset + h.payload_length;
  const std::uint64_t mac_end = h.mac_offset + kTagKeyOctets;
  if (enc_end < h.enc_offset || mac_end < h.mac_offset) fail(ErrorCode::kMalformed, "key offset overflows");
  const auto enc_key = keys_.find(h.enc_key, enc_end);
  const auto mac_key = keys_.find(h.mac_key, mac_end);
  if (enc_end > enc_key->octets.size() || mac_end > mac_key->octets.size()) {
    fail(ErrorCode::kMalformed, "frame references octets beyond the key length");
  }
  const bool same_key = h.enc_key == h.mac_key;
  if (same_key && h.payload_length > 0 && h.enc_offset < mac_end && h.mac_offset < enc_end) {
    fail(ErrorCode::kPadReuse, "payload and tag ranges overlap");
  }
  if (auto it = used_.find(h.enc_key); it != used_.end() && it->second.overlaps(h.enc_offset, enc_end)) {
    fail(ErrorCode::kPadReuse, "encryption range of key " + to_string(h.enc_key) + " already used");
  }
  if (auto it = used_.find(h.mac_key); it != used_.end() && it->second.overlaps(h.mac_offset, mac_end)) {
    fail(ErrorCode::kPadReuse, "tag range of key " + to_string(h.mac_key) + " already used");
  }

  const auto tag_key = std::span<const std::uint8_t>(mac_key->octets).subspan(h.mac_offset, kTagKeyOctets);
  const auto expected = wc_tag_octets(frame.authenticated_bytes(), WcKey::from_octets(tag_key, tag_field()));
  if (expected != frame.tag) fail(ErrorCode::kTagMismatch, "frame authentication failed");

  last_sequence_[stream] = h.sequence;
  used_[h.enc_key].insert(h.enc_offset, enc_end);
  used_[h.mac_key].insert(h.mac_offset, mac_end);

  OpenedFrame out;
  out.msg_type = h.msg_type;
  out.sender = h.sender;
  out.session = h.session;
  out.sequence = h.sequence;
  out.plaintext.resize(h.payload_length);
  for (std::size_t i = 0; i < out.plaintext.size(); ++i) {
    out.plaintext[i] = frame.ciphertext[i] ^ enc_key->octets[h.enc_offset + i];
  }
  return out;
}

std::uint64_t FrameReceiver::used_octets(const KeyId& id) const {
  auto it = used_.find(id);
  return it == used_.end() ? 0 : it->second.covered();
}

}  // namespace qss
