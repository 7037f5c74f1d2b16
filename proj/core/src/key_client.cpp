#include "qss/key_client.hpp"

#include "qss/error.hpp"
#include "qss/messages.hpp"
#include "qss/wire.hpp"

namespace qss {

namespace {

std::shared_ptr<const KeyMaterial> material_of(KeyFile file) {
  auto key = std::make_shared<KeyMaterial>();
  key->id = file.id;
  key->octets = std::move(file.octets);
  return key;
}

KeyId read_key_id(ByteReader& r) {
  KeyId id{};
  auto bytes = r.bytes(id.size());
  std::copy(bytes.begin(), bytes.end(), id.begin());
  return id;
}

}  // namespace

std::vector<std::uint8_t> encode_ksa_request(std::uint16_t peer, std::uint64_t octets, const std::string& purpose) {
  ByteWriter w;
  w.u16(peer);
  w.u64(octets);
  w.str(purpose);
  return w.take();
}

// --- local -------------------------------------------------------------------

LocalKeyClient::LocalKeyClient(KeySupply& supply, Directory directory, std::uint16_t self)
    : supply_(supply), directory_(std::move(directory)), self_(directory_.resolve(self)) {}

KeyFile LocalKeyClient::request(std::uint16_t peer, std::uint64_t octets, const std::string& purpose) {
  const Party p = directory_.resolve(peer);
  return supply_.ksa_request({self_.app, self_.node, p.node, p.app, octets, purpose});
}

KeyFile LocalKeyClient::fetch(const KeyId& id) { return supply_.ksa_fetch(self_.app, self_.node, id); }

// --- remote ------------------------------------------------------------------

struct RemoteKeyClient::Session {
  std::unique_ptr<ByteStream> stream;
  std::unique_ptr<BootstrapPads> pads;
  std::unique_ptr<SecureChannel> channel;
};

RemoteKeyClient::RemoteKeyClient(Connector& connector, Endpoint endpoint, std::vector<std::uint8_t> bootstrap_secret,
                                 std::uint16_t self)
    : connector_(connector), endpoint_(std::move(endpoint)), secret_(std::move(bootstrap_secret)), self_(self) {}

RemoteKeyClient::~RemoteKeyClient() {
  if (session_ && session_->stream) session_->stream->close();
}

KeyFile RemoteKeyClient::call(std::uint8_t type, const std::vector<std::uint8_t>& body) {
  std::lock_guard lock(mu_);
  if (!session_) {
    auto s = std::make_unique<Session>();
    s->stream = connector_.connect(endpoint_);
    const std::uint64_t session = SecureChannel::fresh_session();
    s->pads = std::make_unique<BootstrapPads>(secret_, self_, false, session);
    s->channel = std::make_unique<SecureChannel>(*s->stream, *s->pads, self_, kKeydParty, session);
    session_ = std::move(s);
  }
  try {
    session_->channel->send(type, body, "ksa");
    Message reply = session_->channel->receive();
    check_reply(reply.type, reply.body, MsgType::kKsaKey);
    return decode_key_file(reply.body);
  } catch (const Error& e) {
    // Transport-level trouble leaves the channel state unknown; start over.
    // Errors the daemon reported keep the session.
    if (e.code() == ErrorCode::kTransport || e.code() == ErrorCode::kTagMismatch ||
        e.code() == ErrorCode::kMalformed || e.code() == ErrorCode::kReplay) {
      session_.reset();
    }
    throw;
  }
}

KeyFile RemoteKeyClient::request(std::uint16_t peer, std::uint64_t octets, const std::string& purpose) {
  return call(static_cast<std::uint8_t>(MsgType::kKsaRequest), encode_ksa_request(peer, octets, purpose));
}

KeyFile RemoteKeyClient::fetch(const KeyId& id) {
  return call(static_cast<std::uint8_t>(MsgType::kKsaFetch), std::vector<std::uint8_t>(id.begin(), id.end()));
}

// --- pads --------------------------------------------------------------------

std::shared_ptr<const KeyMaterial> KsaPads::allocate(std::uint16_t peer, std::uint64_t octets,
                                                     const std::string& purpose) {
  return material_of(client_.request(peer, octets, purpose));
}

std::shared_ptr<const KeyMaterial> KsaPads::lookup(std::uint16_t, const KeyId& id, std::uint64_t) {
  return material_of(client_.fetch(id));
}

// --- daemon side -------------------------------------------------------------

KeyService::KeyService(KeySupply& supply, Directory directory, std::vector<std::uint8_t> bootstrap_secret)
    : supply_(supply), directory_(std::move(directory)), secret_(std::move(bootstrap_secret)) {}

void KeyService::serve(std::unique_ptr<ByteStream> stream) {
  BootstrapPads pads(secret_, 0, true, 0);
  SecureChannel channel(*stream, pads, kKeydParty, std::nullopt, 0);
  bool first = true;
  for (;;) {
    Message msg;
    try {
      msg = channel.receive();
    } catch (const Error&) {
      return;
    }
    const std::uint16_t party = *channel.peer();
    if (first) {
      std::lock_guard lock(mu_);
      if (!sessions_.insert({party, channel.session()}).second) return;
      first = false;
    }
    const Party who = directory_.resolve(party);
    std::vector<std::uint8_t> reply;
    std::uint8_t reply_type = static_cast<std::uint8_t>(MsgType::kKsaKey);
    try {
      ByteReader r(msg.body);
      KeyFile file;
      if (msg.type == static_cast<std::uint8_t>(MsgType::kKsaRequest)) {
        const std::uint16_t peer = r.u16();
        const std::uint64_t octets = r.u64();
        const std::string purpose = r.str();
        r.expect_end();
        const Party p = directory_.resolve(peer);
        file = supply_.ksa_request({who.app, who.node, p.node, p.app, octets, purpose});
      } else if (msg.type == static_cast<std::uint8_t>(MsgType::kKsaFetch)) {
        const KeyId id = read_key_id(r);
        r.expect_end();
        file = supply_.ksa_fetch(who.app, who.node, id);
      } else {
        fail(ErrorCode::kMalformed, "unexpected message type for the key daemon");
      }
      reply = encode_key_file(file);
      file.erase_octets();
    } catch (const Error& e) {
      reply_type = static_cast<std::uint8_t>(MsgType::kError);
      reply = encode(ErrorMsg{e.code(), e.detail()});
    }
    try {
      channel.send(reply_type, reply, "ksa");
    } catch (const Error&) {
      return;
    }
    std::fill(reply.begin(), reply.end(), std::uint8_t{0});
  }
}

}  // namespace qss
