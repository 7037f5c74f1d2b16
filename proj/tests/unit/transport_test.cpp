#include <gtest/gtest.h>

#include <future>

#include "qss/channel.hpp"
#include "qss/entropy.hpp"
#include "qss/error.hpp"
#include "qss/stats.hpp"
#include "qss/transport.hpp"

namespace {

using qss::ErrorCode;

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const qss::Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

std::shared_ptr<qss::KeyMaterial> random_key(std::uint8_t tag, std::size_t octets, qss::EntropySource& e) {
  auto key = std::make_shared<qss::KeyMaterial>();
  key->id.fill(tag);
  key->octets.resize(octets);
  e.fill(key->octets);
  return key;
}

class MapLookup : public qss::KeyLookup {
 public:
  void add(std::shared_ptr<const qss::KeyMaterial> k) { keys_[k->id] = std::move(k); }
  std::shared_ptr<const qss::KeyMaterial> find(const qss::KeyId& id, std::uint64_t) override {
    const auto it = keys_.find(id);
    if (it == keys_.end()) qss::fail(ErrorCode::kUnknownKey, "unknown key");
    return it->second;
  }

 private:
  std::map<qss::KeyId, std::shared_ptr<const qss::KeyMaterial>> keys_;
};

// Two parties sharing one pre-agreed key per message, as the key supply would hand out.
class SharedPads : public qss::PadProvider {
 public:
  std::shared_ptr<const qss::KeyMaterial> allocate(std::uint16_t, std::uint64_t octets, const std::string&) override {
    std::lock_guard lock(mu_);
    auto k = random_key(0, octets, e_);
    k->id[0] = static_cast<std::uint8_t>(counter_ >> 8);
    k->id[1] = static_cast<std::uint8_t>(counter_++);
    keys_[k->id] = k;
    allocated_ += octets;
    return k;
  }
  std::shared_ptr<const qss::KeyMaterial> lookup(std::uint16_t, const qss::KeyId& id, std::uint64_t) override {
    std::lock_guard lock(mu_);
    const auto it = keys_.find(id);
    if (it == keys_.end()) qss::fail(ErrorCode::kUnknownKey, "unknown key");
    return it->second;
  }
  std::uint64_t allocated() const { return allocated_; }

 private:
  std::mutex mu_;
  qss::ChaChaEntropy e_{42, 0};
  std::map<qss::KeyId, std::shared_ptr<const qss::KeyMaterial>> keys_;
  std::uint32_t counter_ = 0;
  std::uint64_t allocated_ = 0;
};

TEST(WcTag, Examples) {
  const auto& f = qss::tag_field();
  EXPECT_EQ(f.exponent(), 61u);
  const qss::WcKey key{f.from_u64(2), f.from_u64(3)};
  const std::vector<qss::FieldElement> blocks{f.from_u64(5)};
  EXPECT_EQ(qss::wc_tag_blocks(blocks, key), f.from_u64(13));
  EXPECT_EQ(qss::wc_tag(std::vector<std::uint8_t>{}, key), f.from_u64(3));
}

TEST(WcTag, BlockSplitting) {
  const auto& f = qss::tag_field();
  std::vector<std::uint8_t> msg(15, 0);
  msg[0] = 1;
  msg[7] = 2;
  msg[14] = 3;
  const auto blocks = qss::wc_blocks(msg, f);
  // Three 7-octet blocks then the length.
  ASSERT_EQ(blocks.size(), 4u);
  EXPECT_EQ(blocks[0], f.from_u64(1));
  EXPECT_EQ(blocks[1], f.from_u64(2));
  EXPECT_EQ(blocks[2], f.from_u64(3));
  EXPECT_EQ(blocks[3], f.from_u64(15));
  // Matches b + sum m_i k^i evaluated by hand.
  const qss::WcKey key{f.from_u64(10), f.from_u64(1)};
  EXPECT_EQ(qss::wc_tag(msg, key), f.from_u64(1 + 1 * 10 + 2 * 100 + 3 * 1000 + 15 * 10000));
}

// Random substitutions of an s-block message collide with probability at most s/q.
TEST(WcTag, ToyFieldForgeryBound) {
  const auto& f = qss::MersennePrime::get(13);
  qss::ChaChaEntropy e(5, 0);
  const std::size_t length = 4;  // one-octet blocks at m = 13, plus the length block
  const std::uint64_t trials = 100000;
  std::uint64_t accepted = 0;
  std::size_t s = 0;
  for (std::uint64_t i = 0; i < trials; ++i) {
    std::vector<std::uint8_t> msg(length), forged(length);
    e.fill(msg);
    do {
      e.fill(forged);
    } while (forged == msg);
    const qss::WcKey key{f.random(e), f.random(e)};
    s = qss::wc_blocks(msg, f).size();
    accepted += qss::wc_tag(msg, key) == qss::wc_tag(forged, key) ? 1 : 0;
  }
  const double rate = static_cast<double>(accepted) / trials;
  EXPECT_LE(rate, qss::binomial_upper_bound(static_cast<double>(s) / 8191.0, trials));
}

TEST(Seal, XorExample) {
  qss::ChaChaEntropy e(1, 0);
  auto key = random_key(1, 64, e);
  key->octets[0] = 0x0F;
  qss::KeystreamCursor enc(key), mac(key, 32);
  const auto frame = qss::seal(std::vector<std::uint8_t>{0xAA}, {}, enc, mac);
  EXPECT_EQ(frame.ciphertext, std::vector<std::uint8_t>{0xA5});
  EXPECT_EQ(enc.offset(), 1u);
  EXPECT_EQ(mac.offset(), 48u);
  EXPECT_EQ(frame.encode().size(), qss::kFrameHeaderSize + 1 + qss::kTagSize);
}

TEST(Seal, WireLayout) {
  qss::ChaChaEntropy e(1, 0);
  auto key = random_key(7, 64, e);
  qss::KeystreamCursor c(key);
  const auto frame = qss::seal(std::vector<std::uint8_t>{1, 2, 3}, {9, 0x0102, 0x1122334455667788ull, 5}, c, c);
  const auto bytes = frame.encode();
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "QSS1");
  EXPECT_EQ(bytes[4], qss::kFrameVersion);
  EXPECT_EQ(bytes[5], 9);
  EXPECT_EQ(bytes[6], 0x01);
  EXPECT_EQ(bytes[7], 0x02);
  EXPECT_EQ(bytes[8], 0x11);
  EXPECT_EQ(bytes[15], 0x88);
  EXPECT_EQ(bytes[23], 5);
  EXPECT_EQ(bytes[72], 0);
  EXPECT_EQ(bytes[73], 3);
  const auto decoded = qss::AuthFrame::decode(bytes);
  EXPECT_EQ(decoded.header.sequence, 5u);
  EXPECT_EQ(decoded.ciphertext, frame.ciphertext);
}

TEST(Seal, ExhaustedCursorConsumesNothing) {
  qss::ChaChaEntropy e(2, 0);
  auto key = random_key(1, 20, e);
  qss::KeystreamCursor c(key);
  EXPECT_EQ(code_of([&] { (void)qss::seal(std::vector<std::uint8_t>(5), {}, c, c); }), ErrorCode::kKeyExhausted);
  EXPECT_EQ(c.offset(), 0u);
  EXPECT_TRUE(qss::is_retryable(ErrorCode::kKeyExhausted));
  auto big = random_key(2, 4000, e);
  qss::KeystreamCursor b(big);
  EXPECT_EQ(code_of([&] { (void)qss::seal(std::vector<std::uint8_t>(1501), {}, b, b); }), ErrorCode::kPayloadTooLarge);
}

TEST(Open, RoundTripAllSizes) {
  qss::ChaChaEntropy e(3, 0);
  auto key = random_key(1, 1 << 20, e);
  MapLookup lookup;
  lookup.add(key);
  qss::FrameReceiver rx(lookup);
  qss::KeystreamCursor c(key);
  qss::PadAudit audit;
  std::uint64_t seq = 1;
  for (std::size_t len : {0u, 1u, 7u, 100u, 1499u, 1500u}) {
    std::vector<std::uint8_t> p(len);
    e.fill(p);
    const auto frame = qss::seal(p, {3, 1, 77, seq++}, c, c, &audit);
    const auto opened = rx.open(qss::AuthFrame::decode(frame.encode()));
    EXPECT_EQ(opened.plaintext, p);
    EXPECT_EQ(opened.msg_type, 3);
  }
  EXPECT_EQ(audit.overlaps(), 0u);
  // Each frame costs its payload plus 16 tag-key octets.
  EXPECT_EQ(audit.total_octets(), 0 + 1 + 7 + 100 + 1499 + 1500 + 6 * 16u);
  EXPECT_EQ(c.offset(), audit.total_octets());
}

TEST(Open, RejectsReplayUnknownKeyAndReuse) {
  qss::ChaChaEntropy e(4, 0);
  auto key = random_key(1, 4096, e);
  MapLookup lookup;
  lookup.add(key);
  qss::FrameReceiver rx(lookup);
  qss::KeystreamCursor c(key);
  const auto f1 = qss::seal(std::vector<std::uint8_t>{1, 2}, {1, 1, 5, 1}, c, c);
  EXPECT_NO_THROW((void)rx.open(f1));
  EXPECT_EQ(code_of([&] { (void)rx.open(f1); }), ErrorCode::kReplay);

  // A later sequence number that points back at the same key range.
  qss::KeystreamCursor rewound(key);
  const auto f2 = qss::seal(std::vector<std::uint8_t>{1, 2}, {1, 1, 5, 2}, rewound, rewound);
  EXPECT_EQ(code_of([&] { (void)rx.open(f2); }), ErrorCode::kPadReuse);

  auto other = random_key(9, 64, e);
  qss::KeystreamCursor oc(other);
  const auto f3 = qss::seal(std::vector<std::uint8_t>{1}, {1, 1, 5, 3}, oc, oc);
  EXPECT_EQ(code_of([&] { (void)rx.open(f3); }), ErrorCode::kUnknownKey);
}

TEST(Open, SingleBitFlipsNeverAccepted) {
  qss::ChaChaEntropy e(5, 0);
  auto key = random_key(1, 1 << 24, e);
  MapLookup lookup;
  lookup.add(key);
  qss::KeystreamCursor c(key);
  std::uint64_t accepted = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    std::vector<std::uint8_t> p(1 + e.next_u64() % 200);
    e.fill(p);
    auto bytes = qss::seal(p, {1, 1, 9, i + 1}, c, c).encode();
    const std::size_t bit = e.next_u64() % (bytes.size() * 8);
    bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    qss::FrameReceiver rx(lookup);
    try {
      (void)rx.open(qss::AuthFrame::decode(bytes));
      ++accepted;
    } catch (const qss::Error&) {
    }
  }
  EXPECT_EQ(accepted, 0u);
}

TEST(Open, TagCheckedBeforeRangesAreMarkedUsed) {
  qss::ChaChaEntropy e(6, 0);
  auto key = random_key(1, 4096, e);
  MapLookup lookup;
  lookup.add(key);
  qss::FrameReceiver rx(lookup);
  qss::KeystreamCursor c(key);
  const auto good = qss::seal(std::vector<std::uint8_t>{4, 5, 6}, {1, 1, 5, 1}, c, c);
  auto bad = good;
  bad.ciphertext[0] ^= 1;
  EXPECT_EQ(code_of([&] { (void)rx.open(bad); }), ErrorCode::kTagMismatch);
  EXPECT_EQ(rx.used_octets(key->id), 0u);
  EXPECT_EQ(rx.open(good).plaintext, (std::vector<std::uint8_t>{4, 5, 6}));
}

TEST(Channel, MessagesSplitIntoFramesAndKeysNeverReused) {
  auto [a, b] = qss::make_pipe();
  SharedPads pads;
  qss::PadAudit audit;
  qss::SecureChannel client(*a, pads, 0, 1, qss::SecureChannel::fresh_session(), &audit);
  qss::SecureChannel server(*b, pads, 1, std::nullopt, 0, &audit);
  qss::ChaChaEntropy e(7, 0);
  for (std::size_t len : {0u, 1u, 1496u, 1497u, 6955u, 50000u}) {
    std::vector<std::uint8_t> body(len);
    e.fill(body);
    auto got = std::async(std::launch::async, [&] { return server.receive(); });
    client.send(4, body, "register:x");
    const auto m = got.get();
    EXPECT_EQ(m.type, 4);
    EXPECT_EQ(m.body, body);
    server.send(5, body, "register:x");
    EXPECT_EQ(client.receive().body, body);
  }
  EXPECT_EQ(audit.overlaps(), 0u);
  EXPECT_EQ(qss::message_frame_count(0), 1u);
  EXPECT_EQ(qss::message_frame_count(1496), 1u);
  EXPECT_EQ(qss::message_frame_count(1497), 2u);
  EXPECT_EQ(qss::message_key_octets(1497), 1497u + 2 * (qss::kChunkHeader + qss::kTagKeyOctets));
  EXPECT_EQ(server.peer(), std::optional<std::uint16_t>(0));
  EXPECT_EQ(pads.allocated(), client.key_octets_sent() + server.key_octets_sent());
}

TEST(Channel, PlaintextNeverOnTheWire) {
  auto [a, b] = qss::make_pipe();
  SharedPads pads;
  qss::SecureChannel client(*a, pads, 0, 1, 1234);
  const std::string secret = "a very recognizable secret string";
  client.send(1, std::vector<std::uint8_t>(secret.begin(), secret.end()), "test:x");
  std::vector<std::uint8_t> wire(qss::kFrameHeaderSize + qss::kChunkHeader + secret.size() + qss::kTagSize);
  b->read_exact(wire);
  const std::string seen(wire.begin(), wire.end());
  EXPECT_EQ(seen.find("recognizable"), std::string::npos);
}

}  // namespace
