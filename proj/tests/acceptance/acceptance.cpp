// Acceptance gate: one PASS/FAIL line per criterion on stdout, supporting
// measurements on stderr. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "deployment_fixture.hpp"
#include "qss/adversary.hpp"
#include "qss/bench.hpp"
#include "qss/client.hpp"
#include "qss/key_supply.hpp"
#include "qss/stats.hpp"
#include "qss/transport.hpp"

namespace {

using qss::MsgType;
using qss::Quorum;
using qss_test::owner_call;
using qss_test::random_bytes;
using qss_test::small_options;

constexpr const char* kPass = "amber lattice 7 quill";

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Adversary report lines are computed once and shared by criteria 2 to 4.
const std::vector<qss::ReportLine>& adversary_lines() {
  static const std::vector<qss::ReportLine> lines = [] {
    const auto start = std::chrono::steady_clock::now();
    auto out = qss::run_adversary_suite(qss::AdversaryOptions{});
    std::cerr << "  adversary suite ran in " << seconds_since(start) << " s\n";
    for (const auto& l : out) std::cerr << "  " << qss::format_report_line(l) << '\n';
    return out;
  }();
  return lines;
}

void require_lines(Outcome& o, const std::vector<std::string>& ids) {
  std::map<std::string, const qss::ReportLine*> by_id;
  for (const auto& l : adversary_lines()) by_id[l.id] = &l;
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      o.check(false, id + " missing");
      continue;
    }
    o.detail << ' ' << id << '=' << it->second->statistic << "/" << it->second->bound;
    o.check(it->second->pass, id);
  }
}

void round_trip(Outcome& o) {
  int cases = 0;
  double slowest = 0;
  for (const auto& [n, t] : {std::pair{4u, 1u}, std::pair{3u, 1u}}) {
    for (std::size_t size : {6955u, 13695u, 46000u}) {
      for (unsigned m : {521u, 1279u}) {
        const auto start = std::chrono::steady_clock::now();
        qss::LocalDeployment d(small_options(n, t, m));
        const auto data = random_bytes(size, size + m + n);
        d.owner().register_data(data, kPass, "file");
        const bool exact = d.owner().reconstruct("file", kPass).data == data;
        const double took = seconds_since(start);
        slowest = std::max(slowest, took);
        const std::string name = "n=" + std::to_string(n) + " size=" + std::to_string(size) + " m=" + std::to_string(m);
        o.check(exact, name + " not bit-exact");
        o.check(took < 60.0, name + " took " + std::to_string(took) + " s");
        ++cases;
      }
    }
  }
  o.detail << ' ' << cases << " cases, slowest " << slowest << " s";
}

void wrong_password(Outcome& o) {
  require_lines(o, {"wrong_password.accept.q31.l3", "wrong_password.accept.m521", "wrong_password.uniform.q31"});
}

void forgery(Outcome& o) { require_lines(o, {"forgery.offsets.q31.l3", "forgery.offsets.q8191.l10"}); }

void determinant(Outcome& o) {
  require_lines(o, {"detm.hand.t1", "detm.random.t12.q31", "detm.zero_iff_correct_guess.q31"});
}

void consume_once(Outcome& o) {
  auto opts = small_options();
  opts.config.precompute_batch = 16;
  qss::LocalDeployment d(opts);
  const auto data = random_bytes(700, 1);
  d.owner().register_data(data, kPass, "file");
  const Quorum quorum{1, 2, 3};
  const auto params = d.config().params();

  std::vector<std::future<bool>> futures;
  for (int a = 0; a < 100; ++a) {
    futures.push_back(std::async(std::launch::async, [&, a] {
      qss::ReconRequest msg{"owner", "file", static_cast<std::uint64_t>(a + 1), {}, quorum, 521,
                            qss::encode_password("guess", params.prime())};
      const auto reply =
          owner_call(d, 1, MsgType::kReconRequest, qss::encode(msg), qss::purpose_tag("reconstruct", "file"));
      return reply.type == static_cast<std::uint8_t>(MsgType::kReconResponse);
    }));
  }
  int answered = 0;
  for (auto& f : futures) answered += f.get() ? 1 : 0;
  const auto served = d.server(1).served_slots();
  std::set<qss::SlotId> unique;
  for (const auto& s : served) unique.insert(s.slot);
  const std::size_t duplicates = served.size() - unique.size();
  o.detail << " answered=" << answered << " served=" << served.size() << " duplicates=" << duplicates;
  o.check(answered == 100, "not every attempt was answered");
  o.check(duplicates == 0, "a set was served twice");

  // The same request twice: fresh sets, different vectors, both decode.
  // A separate item, since server 1 alone has moved through the pool above.
  d.owner().register_data(data, kPass, "again");
  qss::ChaChaEntropy e(2, 0);
  const auto reqs = qss::make_request(qss::encode_password(kPass, params.prime()), params, quorum, e, "again", 500);
  std::vector<std::vector<qss::ReconResponse>> rounds(2);
  for (auto& round : rounds) {
    for (const auto& r : reqs) {
      qss::ReconRequest msg{"owner", "again", 500, {}, quorum, 521, r.password_share};
      const auto reply =
          owner_call(d, r.point, MsgType::kReconRequest, qss::encode(msg), qss::purpose_tag("reconstruct", "again"));
      qss::check_reply(reply.type, reply.body, MsgType::kReconResponse);
      round.push_back(qss::decode_recon_response(reply.body));
    }
  }
  bool differ = true;
  for (std::size_t k = 0; k < reqs.size(); ++k) differ = differ && rounds[0][k].values != rounds[1][k].values;
  o.check(differ, "repeated request produced identical responses");
  o.check(qss_test::decode_responses(d, rounds[0], kPass) == data, "first repeat did not decode");
  o.check(qss_test::decode_responses(d, rounds[1], kPass) == data, "second repeat did not decode");
}

void quorum_rule(Outcome& o) {
  qss::LocalDeployment d(small_options());
  const auto data = random_bytes(900, 3);
  d.owner().register_data(data, kPass, "file");
  const auto params = d.config().params();
  const Quorum quorum{1, 2, 3};
  const Quorum key = d.server(1).pool_key_for(quorum);
  const auto ensure = owner_call(d, 1, MsgType::kPrecompEnsure,
                                 qss::encode(qss::PrecompEnsure{"owner", "file", key, {}}),
                                 qss::purpose_tag("precompute", "file"));
  qss::check_reply(ensure.type, ensure.body, MsgType::kAck);
  const auto before = d.server(1).pool_slots("owner", "file", key);

  int rejected = 0;
  for (const Quorum& bad : {Quorum{1}, Quorum{1, 2}, Quorum{1, 2, 3, 4}}) {
    qss::ReconRequest msg{"owner", "file", 1, {}, bad, 521, qss::encode_password(kPass, params.prime())};
    const auto reply =
        owner_call(d, 1, MsgType::kReconRequest, qss::encode(msg), qss::purpose_tag("reconstruct", "file"));
    if (reply.type == static_cast<std::uint8_t>(MsgType::kError) &&
        qss::decode_error(reply.body).code == qss::ErrorCode::kImproperQuorum) {
      ++rejected;
    }
  }
  o.check(rejected == 3, "an improper quorum was not rejected");
  o.check(d.server(1).pool_slots("owner", "file", key) == before && d.server(1).served_slots().empty(),
          "rejected request consumed pool material");

  int good = 0;
  for (const Quorum& q : {Quorum{1, 2, 3}, Quorum{1, 2, 4}, Quorum{1, 3, 4}, Quorum{2, 3, 4}}) {
    good += d.owner().reconstruct("file", kPass, {.quorum = q}).data == data ? 1 : 0;
  }
  o.detail << " rejected=" << rejected << "/3 quorums_ok=" << good << "/4";
  o.check(good == 4, "a quorum failed to reconstruct");
}

class MapLookup : public qss::KeyLookup {
 public:
  void add(std::shared_ptr<const qss::KeyMaterial> k) { keys_[k->id] = std::move(k); }
  std::shared_ptr<const qss::KeyMaterial> find(const qss::KeyId& id, std::uint64_t) override {
    const auto it = keys_.find(id);
    if (it == keys_.end()) qss::fail(qss::ErrorCode::kUnknownKey, "unknown key");
    return it->second;
  }

 private:
  std::map<qss::KeyId, std::shared_ptr<const qss::KeyMaterial>> keys_;
};

void transport(Outcome& o) {
  {
    qss::LocalDeployment d(small_options());
    const auto data = random_bytes(6955, 4);
    d.owner().register_data(data, kPass, "file");
    o.check(d.owner().reconstruct("file", kPass).data == data, "round trip failed");
    const auto& audit = d.pad_audit();
    o.detail << " pad_ranges=" << audit.ranges() << " overlaps=" << audit.overlaps();
    o.check(audit.ranges() > 0 && audit.overlaps() == 0, "pad ranges overlap");
  }
  {
    qss::ChaChaEntropy e(5, 0);
    auto key = std::make_shared<qss::KeyMaterial>();
    key->id.fill(1);
    key->octets.resize(1 << 24);
    e.fill(key->octets);
    MapLookup lookup;
    lookup.add(key);
    qss::KeystreamCursor cursor(key);
    std::uint64_t accepted = 0;
    for (std::uint64_t i = 0; i < 10'000; ++i) {
      std::vector<std::uint8_t> p(1 + e.next_u64() % 200);
      e.fill(p);
      auto bytes = qss::seal(p, {1, 1, 9, i + 1}, cursor, cursor).encode();
      const std::size_t bit = e.next_u64() % (bytes.size() * 8);
      bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      qss::FrameReceiver rx(lookup);
      try {
        (void)rx.open(qss::AuthFrame::decode(bytes));
        ++accepted;
      } catch (const qss::Error&) {
      }
    }
    o.detail << " bit_flips_accepted=" << accepted << "/10000";
    o.check(accepted == 0, "a tampered frame was accepted");
  }
  {
    const auto& f = qss::MersennePrime::get(13);
    qss::ChaChaEntropy e(6, 0);
    const std::uint64_t trials = 100'000;
    std::uint64_t accepted = 0;
    std::size_t s = 0;
    for (std::uint64_t i = 0; i < trials; ++i) {
      std::vector<std::uint8_t> msg(4), forged(4);
      e.fill(msg);
      do {
        e.fill(forged);
      } while (forged == msg);
      const qss::WcKey key{f.random(e), f.random(e)};
      s = qss::wc_blocks(msg, f).size();
      accepted += qss::wc_tag(msg, key) == qss::wc_tag(forged, key) ? 1 : 0;
    }
    const double rate = static_cast<double>(accepted) / static_cast<double>(trials);
    const double bound = qss::binomial_upper_bound(static_cast<double>(s) / 8191.0, trials);
    o.detail << " toy_tag_rate=" << rate << "<=" << bound;
    o.check(rate <= bound, "toy-field tag forgery rate above bound");
  }
}

void key_supply(Outcome& o) {
  {
    auto clock = std::make_shared<qss::ManualClock>();
    qss::TopologyConfig t = qss::default_topology();
    t.seed = 1;
    t.key_ttl_ms = 5000;
    t.authorized_apps = {"alice", "bob"};
    qss::KeySupply ks(std::move(t), clock);
    qss::ChaChaEntropy e(7, 0);
    std::vector<std::string> links;
    for (const auto& l : ks.ledger().links) links.push_back(l.name);
    std::vector<std::pair<qss::NodeId, qss::KeyId>> pending;
    int unbalanced = 0, unexpected = 0;
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
        if (err.code() != qss::ErrorCode::kKeyConsumed && err.code() != qss::ErrorCode::kKeyExpired) ++unexpected;
      }
      unbalanced += ks.ledger().balanced() ? 0 : 1;
    }
    o.detail << " unbalanced_after=" << unbalanced << "/1000";
    o.check(unbalanced == 0 && unexpected == 0, "ledger conservation");
  }
  {
    qss::TopologyConfig t;
    t.nodes = {1, 2, 3, 4};
    t.kms_node = 2;
    t.links = {{"a", 1, 2}, {"b", 2, 3}, {"c", 3, 4}};
    t.seed = 5;
    qss::KeySupply ks(std::move(t));
    const std::uint64_t octets = 96;
    const auto before = ks.ledger();
    const auto file = ks.relay_key(1, 4, octets);
    const auto src = ks.stored_copy(1, file.id);
    const auto dst = ks.stored_copy(4, file.id);
    const bool identical = src && dst && src->octets == dst->octets && src->octets.size() == octets;
    const auto after = ks.ledger();
    std::uint64_t consumed = 0;
    bool per_link = true;
    for (std::size_t i = 0; i < after.links.size(); ++i) {
      const auto delta = after.links[i].consumed - before.links[i].consumed;
      per_link = per_link && delta == octets;
      consumed += delta;
    }
    const std::uint64_t hops = file.route.size() - 1;
    o.detail << " hops=" << hops << " consumed=" << consumed << " identical=" << identical;
    o.check(hops == 3 && identical, "3-hop relay copies differ");
    o.check(per_link && consumed == octets * hops, "per-hop consumption");
  }
}

void key_ratio(Outcome& o) {
  qss::LocalDeployment d(small_options(4, 1, 521));
  const auto data = random_bytes(6955, 8);
  d.owner().register_data(data, kPass, "file");
  o.check(d.owner().reconstruct("file", kPass).data == data, "round trip failed");
  const auto stats = qss::key_stats(d.key_supply().audit_log(), {{"file", data.size()}});
  const double ratio = stats.ratio();
  o.detail << " key_octets=" << stats.total << " ratio=" << ratio;
  for (const auto& [phase, octets] : stats.by_phase) o.detail << ' ' << phase << '=' << octets;
  o.check(ratio >= 10.0 && ratio <= 60.0, "ratio outside [10, 60]");
}

void block_counts(Outcome& o) {
  qss::BenchOptions opts;
  opts.repetitions = 1;
  const auto rows = qss::run_bench(opts);
  int checked = 0;
  std::uint64_t l6955 = 0;
  for (const auto& r : rows) {
    // Parse the CSV line the bench tool prints and check the l column.
    std::istringstream line(qss::format_bench_row(r));
    std::string size, m, l;
    std::getline(line, size, ',');
    std::getline(line, m, ',');
    std::getline(line, l, ',');
    const std::uint64_t bytes = std::stoull(size), exponent = std::stoull(m), blocks = std::stoull(l);
    const std::uint64_t expected = (8 * bytes + exponent - 2) / (exponent - 1);
    o.check(blocks == expected, size + "/" + m + " has l=" + l);
    if (bytes == 6955 && exponent == 521) l6955 = blocks;
    ++checked;
  }
  o.detail << ' ' << checked << " grid points, l(6955,521)=" << l6955;
  o.check(checked == 33, "grid incomplete");
  o.check(l6955 == 107, "l(6955, 521) != 107");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"round_trip", round_trip},         {"wrong_password", wrong_password}, {"forgery", forgery},
      {"determinant", determinant},       {"consume_once", consume_once},     {"quorum_rule", quorum_rule},
      {"transport", transport},           {"key_supply", key_supply},         {"key_ratio", key_ratio},
      {"block_counts", block_counts},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::printf("criterion %zu %s:%s (%.1f s) %s\n", i + 1, criteria[i].first.c_str(), o.detail.str().c_str(),
                seconds_since(start), o.pass ? "PASS" : "FAIL");
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
