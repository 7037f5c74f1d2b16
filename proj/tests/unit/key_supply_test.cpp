#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <future>
#include <set>
#include <thread>

#include "qss/channel.hpp"
#include "qss/entropy.hpp"
#include "qss/error.hpp"
#include "qss/key_client.hpp"
#include "qss/key_supply.hpp"

namespace {

using qss::ErrorCode;
using qss::KeySupply;
using qss::TopologyConfig;

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const qss::Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

// 1 - 2 - 3 - 4 plus an isolated node 9.
TopologyConfig line_topology() {
  TopologyConfig t;
  t.nodes = {1, 2, 3, 4, 9};
  t.kms_node = 2;
  t.links = {{"a", 1, 2}, {"b", 2, 3}, {"c", 3, 4}};
  t.seed = 5;
  t.authorized_apps = {"alice", "bob"};
  return t;
}

TopologyConfig seeded_default() {
  TopologyConfig t = qss::default_topology();
  t.seed = 1;
  t.authorized_apps = {"alice", "bob", "carol"};
  return t;
}

TEST(Topology, DefaultShape) {
  const TopologyConfig t = qss::default_topology();
  EXPECT_EQ(t.nodes.size(), 5u);
  EXPECT_EQ(t.links.size(), 6u);
  EXPECT_EQ(t.kms_node, 5);
  KeySupply ks(seeded_default());
  for (qss::NodeId a : t.nodes) {
    for (qss::NodeId b : t.nodes) {
      if (a != b) EXPECT_LE(ks.route(a, b).hops(), 2u);
    }
  }
  EXPECT_EQ(ks.route(1, 2).hops(), 1u);
  EXPECT_EQ(ks.route(1, 3).hops(), 2u);
  EXPECT_EQ(ks.route(1, 1).hops(), 0u);
  const auto table = ks.routing_table();
  EXPECT_EQ(table.links.size(), 6u);
}

TEST(LinkKeys, BothEndsIdentical) {
  KeySupply ks(seeded_default());
  ks.generate_link_keys("NEC-0", 100);
  EXPECT_EQ(ks.pool_level("NEC-0", 1), 100u);
  EXPECT_EQ(ks.pool_level("NEC-0", 2), 100u);
  EXPECT_EQ(ks.pool_snapshot("NEC-0", 1), ks.pool_snapshot("NEC-0", 2));
  ks.generate_link_keys("NEC-0", 28);
  EXPECT_EQ(ks.pool_level("NEC-0", 2), 128u);
  EXPECT_EQ(code_of([&] { ks.generate_link_keys("nope", 1); }), ErrorCode::kUnknownLink);
}

TEST(LinkKeys, DistinctLinksAreUncorrelated) {
  KeySupply ks(seeded_default());
  const std::size_t n = 100000;
  ks.generate_link_keys("NEC-0", n);
  ks.generate_link_keys("Toshiba", n);
  const auto a = ks.pool_snapshot("NEC-0", 1);
  const auto b = ks.pool_snapshot("Toshiba", 1);
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += a[i];
    sb += b[i];
    sab += static_cast<double>(a[i]) * b[i];
    saa += static_cast<double>(a[i]) * a[i];
    sbb += static_cast<double>(b[i]) * b[i];
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double r = cov / std::sqrt((saa / n - (sa / n) * (sa / n)) * (sbb / n - (sb / n) * (sb / n)));
  EXPECT_LT(std::abs(r), 4.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_NE(a, b);
}

TEST(Relay, ThreeHopsByteIdenticalAndChargedPerHop) {
  KeySupply ks(line_topology());
  const auto before = ks.ledger();
  const auto file = ks.relay_key(1, 4, 64);
  EXPECT_EQ(file.route, (std::vector<qss::NodeId>{1, 2, 3, 4}));
  const auto src = ks.stored_copy(1, file.id);
  const auto dst = ks.stored_copy(4, file.id);
  ASSERT_TRUE(src && dst);
  EXPECT_EQ(src->octets, dst->octets);
  EXPECT_EQ(src->octets.size(), 64u);
  EXPECT_FALSE(ks.stored_copy(2, file.id).has_value());
  const auto after = ks.ledger();
  std::uint64_t consumed = 0;
  for (std::size_t i = 0; i < after.links.size(); ++i) {
    EXPECT_EQ(after.links[i].consumed - before.links[i].consumed, 64u) << after.links[i].name;
    consumed += after.links[i].consumed - before.links[i].consumed;
  }
  EXPECT_EQ(consumed, 64u * 3);
  EXPECT_TRUE(after.balanced());
}

TEST(Relay, DirectLinkIsOnePoolDraw) {
  KeySupply ks(line_topology());
  const auto file = ks.relay_key(2, 3, 32);
  EXPECT_EQ(file.route.size(), 2u);
  EXPECT_EQ(ks.ledger().links[1].consumed, 32u);
  EXPECT_EQ(ks.ledger().links[0].consumed, 0u);
}

TEST(Relay, NoRoute) {
  KeySupply ks(line_topology());
  EXPECT_EQ(code_of([&] { (void)ks.relay_key(1, 9, 8); }), ErrorCode::kNoRoute);
}

TEST(Relay, ShortPoolConsumesNothing) {
  TopologyConfig t = line_topology();
  t.auto_generate = false;
  KeySupply ks(std::move(t));
  ks.generate_link_keys("a", 100);
  ks.generate_link_keys("b", 100);
  ks.generate_link_keys("c", 10);
  EXPECT_EQ(code_of([&] { (void)ks.relay_key(1, 4, 50); }), ErrorCode::kKeyExhausted);
  EXPECT_EQ(ks.pool_level("a", 1), 100u);
  EXPECT_EQ(ks.pool_level("b", 2), 100u);
  EXPECT_EQ(ks.pool_level("c", 4), 10u);
  EXPECT_TRUE(ks.ledger().balanced());
}

TEST(Ksa, DeliverAndFetch) {
  KeySupply ks(seeded_default());
  qss::KsaRequest req{"alice", 1, 3, "bob", 64, "register:x"};
  const auto mine = ks.ksa_request(req);
  const auto theirs = ks.ksa_fetch("bob", 3, mine.id);
  EXPECT_EQ(mine.octets, theirs.octets);
  EXPECT_EQ(mine.octets.size(), 64u);
  const auto second = ks.ksa_request(req);
  EXPECT_NE(second.id, mine.id);
  const auto log = ks.audit_log();
  ASSERT_GE(log.size(), 3u);
  EXPECT_EQ(log[0].event, "deliver");
  EXPECT_EQ(log[0].key, mine.id);
  EXPECT_EQ(log[0].app_id, "alice");
  EXPECT_EQ(log[0].purpose, "register:x");
  EXPECT_GT(log[0].at, 0u);
  EXPECT_EQ(log[1].event, "fetch");
  EXPECT_EQ(log[1].app_id, "bob");
  EXPECT_EQ(code_of([&] { (void)ks.ksa_fetch("bob", 3, mine.id); }), ErrorCode::kKeyConsumed);
  EXPECT_EQ(code_of([&] { (void)ks.ksa_fetch("carol", 3, second.id); }), ErrorCode::kUnauthorized);
}

TEST(Ksa, UnauthorizedApplication) {
  KeySupply ks(seeded_default());
  EXPECT_EQ(code_of([&] { (void)ks.ksa_request({"mallory", 1, 3, "bob", 8, "x:y"}); }), ErrorCode::kUnauthorized);
  EXPECT_EQ(code_of([&] { (void)ks.ksa_request({"alice", 1, 3, "mallory", 8, "x:y"}); }), ErrorCode::kUnauthorized);
  ks.authorize("mallory");
  EXPECT_NO_THROW((void)ks.ksa_request({"mallory", 1, 3, "bob", 8, "x:y"}));
}

TEST(Ksa, ConcurrentRequestsNeverShareMaterial) {
  KeySupply ks(seeded_default());
  std::vector<std::future<std::vector<qss::KeyFile>>> workers;
  for (int w = 0; w < 10; ++w) {
    workers.push_back(std::async(std::launch::async, [&, w] {
      std::vector<qss::KeyFile> got;
      for (int i = 0; i < 100; ++i) {
        const qss::NodeId src = static_cast<qss::NodeId>(1 + (w + i) % 4);
        const qss::NodeId dst = static_cast<qss::NodeId>(1 + (w + i + 1) % 4);
        got.push_back(ks.ksa_request({"alice", src, dst, "bob", 32, "stress:x"}));
      }
      return got;
    }));
  }
  std::set<qss::KeyId> ids;
  std::map<std::string, std::vector<std::pair<std::uint64_t, std::uint64_t>>> ranges;
  for (auto& f : workers) {
    for (const auto& k : f.get()) {
      EXPECT_TRUE(ids.insert(k.id).second);
      for (const auto& d : k.draws) ranges[d.link].emplace_back(d.offset, d.offset + d.length);
    }
  }
  EXPECT_EQ(ids.size(), 1000u);
  EXPECT_FALSE(ranges.empty());
  for (auto& [link, r] : ranges) {
    std::sort(r.begin(), r.end());
    for (std::size_t i = 1; i < r.size(); ++i) EXPECT_LE(r[i - 1].second, r[i].first) << link;
  }
  EXPECT_TRUE(ks.ledger().balanced());
}

TEST(Expiry, ErasesOnlyPastDueKeys) {
  auto clock = std::make_shared<qss::ManualClock>();
  TopologyConfig t = seeded_default();
  t.key_ttl_ms = 1000;
  KeySupply ks(std::move(t), clock);
  const auto old_key = ks.ksa_request({"alice", 1, 2, "bob", 16, "x:y"});
  clock->advance(600);
  const auto new_key = ks.ksa_request({"alice", 1, 2, "bob", 16, "x:y"});
  clock->advance(600);
  EXPECT_EQ(ks.expire_keys(), 1u);
  const auto copy = ks.stored_copy(2, old_key.id);
  ASSERT_TRUE(copy);
  EXPECT_EQ(copy->state, qss::KeyState::kExpired);
  EXPECT_TRUE(copy->octets.empty());
  EXPECT_EQ(code_of([&] { (void)ks.ksa_fetch("bob", 2, old_key.id); }), ErrorCode::kKeyExpired);
  EXPECT_EQ(ks.ksa_fetch("bob", 2, new_key.id).octets, new_key.octets);
  qss::KeyId unknown{};
  unknown.fill(0xEE);
  EXPECT_EQ(code_of([&] { (void)ks.ksa_fetch("bob", 2, unknown); }), ErrorCode::kUnknownKey);
  EXPECT_TRUE(ks.ledger().balanced());
}

TEST(Ledger, ConservationUnderRandomOperations) {
  auto clock = std::make_shared<qss::ManualClock>();
  TopologyConfig t = seeded_default();
  t.key_ttl_ms = 5000;
  KeySupply ks(std::move(t), clock);
  qss::ChaChaEntropy e(77, 0);
  const std::vector<std::string> links{"NEC-0", "Gakushuin", "SeQureNet", "Toshiba", "NTT-NICT", "NEC-1"};
  std::vector<std::pair<qss::NodeId, qss::KeyId>> pending;
  for (int op = 0; op < 1000; ++op) {
    const auto kind = e.next_u64() % 6;
    const auto a = static_cast<qss::NodeId>(1 + e.next_u64() % 5);
    const auto b = static_cast<qss::NodeId>(1 + e.next_u64() % 5);
    const std::uint64_t n = 1 + e.next_u64() % 300;
    try {
      switch (kind) {
        case 0: ks.generate_link_keys(links[e.next_u64() % links.size()], n); break;
        case 1: (void)ks.relay_key(a, b, n); break;
        case 2: pending.emplace_back(b, ks.ksa_request({"alice", a, b, "bob", n, "ops:x"}).id); break;
        case 3:
          if (!pending.empty()) {
            const auto [node, id] = pending[e.next_u64() % pending.size()];
            (void)ks.ksa_fetch("bob", node, id);
          }
          break;
        case 4: clock->advance(e.next_u64() % 2000); break;
        default: (void)ks.expire_keys(); break;
      }
    } catch (const qss::Error& err) {
      // Fetching a consumed or expired key is an expected outcome here.
      ASSERT_TRUE(err.code() == ErrorCode::kKeyConsumed || err.code() == ErrorCode::kKeyExpired) << err.what();
    }
    const auto l = ks.ledger();
    ASSERT_TRUE(l.balanced()) << "after op " << op;
  }
}

TEST(KeyFiles, BinaryRoundTripAndPersistence) {
  qss::KeyFile f;
  f.id.fill(3);
  f.route = {1, 5, 3};
  f.octets = {9, 8, 7, 6};
  f.length = 4;
  f.created_at = 10;
  f.expires_at = 20;
  f.state = qss::KeyState::kReserved;
  f.app_id = "bob";
  f.purpose = "register:x";
  const auto bytes = qss::encode_key_file(f);
  EXPECT_TRUE(std::equal(f.id.begin(), f.id.end(), bytes.begin()));
  EXPECT_EQ(bytes[16 + 7], 4);  // length field
  EXPECT_EQ(bytes[24], 9);
  const auto g = qss::decode_key_file(bytes);
  EXPECT_EQ(g.id, f.id);
  EXPECT_EQ(g.octets, f.octets);
  EXPECT_EQ(g.route, f.route);
  EXPECT_EQ(g.state, f.state);
  EXPECT_EQ(g.app_id, f.app_id);
  EXPECT_EQ(g.purpose, f.purpose);
  const auto path = std::filesystem::temp_directory_path() / "qss_key_file_test.bin";
  qss::write_key_file(path, f);
  EXPECT_EQ(qss::read_key_file(path).octets, f.octets);
  std::filesystem::remove(path);
}

TEST(Audit, LineRoundTrip) {
  qss::AuditRecord r;
  r.at = 123;
  r.event = "deliver";
  r.key.fill(0xAB);
  r.app_id = "owner";
  r.peer_app = "server-2";
  r.node = 1;
  r.peer = 2;
  r.octets = 555;
  r.purpose = "reconstruct:abc";
  const auto line = qss::format_audit_line(r);
  const auto back = qss::parse_audit_line(line);
  EXPECT_EQ(back.key, r.key);
  EXPECT_EQ(back.purpose, r.purpose);
  EXPECT_EQ(back.octets, r.octets);
  EXPECT_EQ(back.peer_app, r.peer_app);
}

TEST(KeyService, RemoteClientMatchesLocalSupply) {
  TopologyConfig t = seeded_default();
  t.authorized_apps = {qss::app_for_party(qss::kOwnerParty), qss::app_for_party(1)};
  KeySupply ks(std::move(t));
  qss::Directory dir;
  dir.server_nodes = {{1, 3}};
  const std::vector<std::uint8_t> secret(32, 0x5C);
  qss::KeyService service(ks, dir, secret);
  qss::LoopbackNetwork net;
  net.listen("keyd", [&](std::unique_ptr<qss::ByteStream> s) { service.serve(std::move(s)); });
  qss::RemoteKeyClient owner(net, "keyd", secret, qss::kOwnerParty);
  qss::RemoteKeyClient server(net, "keyd", secret, 1);
  const auto mine = owner.request(1, 100, "register:d");
  const auto theirs = server.fetch(mine.id);
  EXPECT_EQ(mine.octets, theirs.octets);
  EXPECT_EQ(mine.octets.size(), 100u);
  EXPECT_EQ(ks.audit_log().front().app_id, "owner");
  EXPECT_EQ(ks.audit_log().front().peer_app, "server-1");
  // A wrong bootstrap secret cannot talk to the daemon.
  qss::RemoteKeyClient intruder(net, "keyd", std::vector<std::uint8_t>(32, 0x00), qss::kOwnerParty);
  EXPECT_THROW((void)intruder.request(1, 10, "register:d"), qss::Error);
  net.shutdown();
}

TEST(KeyService, LocalClientAndPads) {
  TopologyConfig t = seeded_default();
  t.authorized_apps = {qss::app_for_party(qss::kOwnerParty), qss::app_for_party(2)};
  KeySupply ks(std::move(t));
  qss::Directory dir;
  dir.server_nodes = {{2, 2}};
  qss::LocalKeyClient owner(ks, dir, qss::kOwnerParty);
  qss::LocalKeyClient server(ks, dir, 2);
  qss::KsaPads owner_pads(owner), server_pads(server);
  const auto k = owner_pads.allocate(2, 40, "register:z");
  const auto peer = server_pads.lookup(qss::kOwnerParty, k->id, 40);
  EXPECT_EQ(k->octets, peer->octets);
}

}  // namespace
