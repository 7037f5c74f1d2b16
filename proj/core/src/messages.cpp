#include "qss/messages.hpp"

#include "qss/wire.hpp"

namespace qss {

namespace {

constexpr std::uint32_t kMaxElements = 1u << 24;

void put_quorum(ByteWriter& w, const Quorum& q) {
  w.u16(static_cast<std::uint16_t>(q.size()));
  for (auto j : q) w.u32(j);
}

Quorum get_quorum(ByteReader& r) {
  const std::uint16_t n = r.u16();
  Quorum q;
  q.reserve(n);
  for (std::uint16_t i = 0; i < n; ++i) q.push_back(r.u32());
  return q;
}

void put_slot(ByteWriter& w, const SlotId& s) {
  w.u64(s.round);
  w.u32(s.slot);
}

SlotId get_slot(ByteReader& r) {
  SlotId s;
  s.round = r.u64();
  s.slot = r.u32();
  return s;
}

const MersennePrime& field_of(unsigned m) {
  if (!MersennePrime::is_known(m)) fail(ErrorCode::kMalformed, "unsupported field exponent " + std::to_string(m));
  return MersennePrime::get(m);
}

void put_elements(ByteWriter& w, const std::vector<FieldElement>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (const auto& e : v) w.element(e);
}

std::vector<FieldElement> get_elements(ByteReader& r, const MersennePrime& f) {
  const std::uint32_t n = r.u32();
  if (n > kMaxElements || static_cast<std::uint64_t>(n) * f.byte_width() > r.remaining()) {
    fail(ErrorCode::kMalformed, "element count exceeds message size");
  }
  std::vector<FieldElement> v;
  v.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) v.push_back(r.element(f));
  return v;
}

}  // namespace

std::string_view to_string(MsgType type) {
  switch (type) {
    case MsgType::kStoreShares: return "STORE_SHARES";
    case MsgType::kAck: return "ACK";
    case MsgType::kDeleteShares: return "DELETE_SHARES";
    case MsgType::kPrecompEnsure: return "PRECOMP_ENSURE";
    case MsgType::kPrecompBegin: return "PRECOMP_BEGIN";
    case MsgType::kPrecompContrib: return "PRECOMP_CONTRIB";
    case MsgType::kPrecompCommit: return "PRECOMP_COMMIT";
    case MsgType::kPrecompAbort: return "PRECOMP_ABORT";
    case MsgType::kReconRequest: return "RECON_REQUEST";
    case MsgType::kReconResponse: return "RECON_RESPONSE";
    case MsgType::kKsaRequest: return "KSA_REQUEST";
    case MsgType::kKsaFetch: return "KSA_FETCH";
    case MsgType::kKsaKey: return "KSA_KEY";
    case MsgType::kError: return "ERROR";
  }
  return "UNKNOWN";
}

bool is_known_message(std::uint8_t type) { return to_string(static_cast<MsgType>(type)) != "UNKNOWN"; }

void check_reply(std::uint8_t type, std::span<const std::uint8_t> body, MsgType expected) {
  if (type == static_cast<std::uint8_t>(expected)) return;
  if (type == static_cast<std::uint8_t>(MsgType::kError)) {
    const ErrorMsg err = decode_error(body);
    throw Error(err.code, err.detail);
  }
  fail(ErrorCode::kMalformed, "expected " + std::string(to_string(expected)) + ", got " +
                                  std::string(to_string(static_cast<MsgType>(type))));
}

std::vector<std::uint8_t> quorum_bitmap(const Quorum& quorum) {
  std::uint32_t top = 0;
  for (auto j : quorum) {
    if (j == 0) fail(ErrorCode::kImproperQuorum, "server indices start at 1");
    top = std::max(top, j);
  }
  std::vector<std::uint8_t> bits((top + 7) / 8, 0);
  for (auto j : quorum) bits[(j - 1) / 8] |= static_cast<std::uint8_t>(1u << ((j - 1) % 8));
  return bits;
}

Quorum quorum_from_bitmap(std::span<const std::uint8_t> bitmap) {
  Quorum q;
  for (std::size_t i = 0; i < bitmap.size(); ++i) {
    for (unsigned b = 0; b < 8; ++b) {
      if (bitmap[i] & (1u << b)) q.push_back(static_cast<std::uint32_t>(i * 8 + b + 1));
    }
  }
  return q;
}

std::vector<std::uint8_t> encode(const StoreShares& msg) {
  ByteWriter w;
  w.u32(msg.n);
  w.u32(msg.t);
  w.u32(msg.m);
  w.u8(msg.overwrite ? 1 : 0);
  const auto& b = msg.bundle;
  w.str(b.owner_id);
  w.str(b.data_id);
  w.u32(b.server);
  w.u64(b.byte_length);
  put_elements(w, b.data_shares);
  w.element(b.password_share);
  return w.take();
}

StoreShares decode_store_shares(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  StoreShares msg;
  msg.n = r.u32();
  msg.t = r.u32();
  msg.m = r.u32();
  msg.overwrite = r.u8() != 0;
  const MersennePrime& f = field_of(msg.m);
  auto& b = msg.bundle;
  b.owner_id = r.str();
  b.data_id = r.str();
  b.server = r.u32();
  b.byte_length = r.u64();
  b.data_shares = get_elements(r, f);
  b.password_share = r.element(f);
  r.expect_end();
  return msg;
}

std::vector<std::uint8_t> encode(const DeleteShares& msg) {
  ByteWriter w;
  w.str(msg.owner_id);
  w.str(msg.data_id);
  return w.take();
}

DeleteShares decode_delete_shares(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  DeleteShares msg;
  msg.owner_id = r.str();
  msg.data_id = r.str();
  r.expect_end();
  return msg;
}

std::vector<std::uint8_t> encode(const Ack& msg) {
  ByteWriter w;
  w.u64(msg.value);
  return w.take();
}

Ack decode_ack(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  Ack a;
  a.value = r.u64();
  r.expect_end();
  return a;
}

std::vector<std::uint8_t> encode(const PrecompEnsure& msg) {
  ByteWriter w;
  w.str(msg.owner_id);
  w.str(msg.data_id);
  put_quorum(w, msg.pool_key);
  put_slot(w, msg.floor);
  return w.take();
}

PrecompEnsure decode_precomp_ensure(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  PrecompEnsure msg;
  msg.owner_id = r.str();
  msg.data_id = r.str();
  msg.pool_key = get_quorum(r);
  msg.floor = get_slot(r);
  r.expect_end();
  return msg;
}

std::vector<std::uint8_t> encode(const PrecompBegin& msg) {
  ByteWriter w;
  w.str(msg.owner_id);
  w.str(msg.data_id);
  put_quorum(w, msg.label);
  w.u64(msg.round);
  w.u32(msg.count);
  return w.take();
}

PrecompBegin decode_precomp_begin(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  PrecompBegin msg;
  msg.owner_id = r.str();
  msg.data_id = r.str();
  msg.label = get_quorum(r);
  msg.round = r.u64();
  msg.count = r.u32();
  r.expect_end();
  return msg;
}

std::vector<std::uint8_t> encode(const PrecompContrib& msg) {
  ByteWriter w;
  w.str(msg.owner_id);
  w.str(msg.data_id);
  put_quorum(w, msg.label);
  w.u64(msg.round);
  w.u32(msg.contributor);
  w.u32(msg.count);
  w.u32(msg.blocks);
  w.u32(msg.m);
  put_elements(w, msg.randomizer);
  put_elements(w, msg.zero);
  return w.take();
}

PrecompContrib decode_precomp_contrib(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  PrecompContrib msg;
  msg.owner_id = r.str();
  msg.data_id = r.str();
  msg.label = get_quorum(r);
  msg.round = r.u64();
  msg.contributor = r.u32();
  msg.count = r.u32();
  msg.blocks = r.u32();
  msg.m = r.u32();
  const MersennePrime& f = field_of(msg.m);
  msg.randomizer = get_elements(r, f);
  msg.zero = get_elements(r, f);
  r.expect_end();
  const std::uint64_t expected = static_cast<std::uint64_t>(msg.count) * msg.blocks;
  if (msg.randomizer.size() != expected || msg.zero.size() != expected) {
    fail(ErrorCode::kMalformed, "contribution size does not match count x blocks");
  }
  return msg;
}

std::vector<std::uint8_t> encode(const PrecompDecision& msg) {
  ByteWriter w;
  w.str(msg.owner_id);
  w.str(msg.data_id);
  put_quorum(w, msg.label);
  w.u64(msg.round);
  return w.take();
}

PrecompDecision decode_precomp_decision(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  PrecompDecision msg;
  msg.owner_id = r.str();
  msg.data_id = r.str();
  msg.label = get_quorum(r);
  msg.round = r.u64();
  r.expect_end();
  return msg;
}

std::vector<std::uint8_t> encode(const ReconRequest& msg) {
  ByteWriter w;
  w.str(msg.owner_id);
  w.str(msg.data_id);
  w.u64(msg.attempt_id);
  put_slot(w, msg.floor);
  const auto bits = quorum_bitmap(msg.quorum);
  w.u16(static_cast<std::uint16_t>(bits.size()));
  w.bytes(bits);
  w.u32(msg.m);
  w.element(msg.password_share);
  return w.take();
}

ReconRequest decode_recon_request(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  ReconRequest msg;
  msg.owner_id = r.str();
  msg.data_id = r.str();
  msg.attempt_id = r.u64();
  msg.floor = get_slot(r);
  const std::uint16_t nbits = r.u16();
  msg.quorum = quorum_from_bitmap(r.bytes(nbits));
  msg.m = r.u32();
  msg.password_share = r.element(field_of(msg.m));
  r.expect_end();
  return msg;
}

std::vector<std::uint8_t> encode(const ReconResponse& msg) {
  ByteWriter w;
  put_slot(w, msg.slot);
  w.u32(msg.point);
  w.u64(msg.byte_length);
  w.u32(msg.m);
  put_elements(w, msg.values);
  return w.take();
}

ReconResponse decode_recon_response(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  ReconResponse msg;
  msg.slot = get_slot(r);
  msg.point = r.u32();
  msg.byte_length = r.u64();
  msg.m = r.u32();
  msg.values = get_elements(r, field_of(msg.m));
  r.expect_end();
  return msg;
}

std::vector<std::uint8_t> encode(const ErrorMsg& msg) {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(msg.code));
  w.str(msg.detail);
  return w.take();
}

ErrorMsg decode_error(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  ErrorMsg msg;
  msg.code = static_cast<ErrorCode>(r.u16());
  msg.detail = r.str();
  r.expect_end();
  return msg;
}

}  // namespace qss
