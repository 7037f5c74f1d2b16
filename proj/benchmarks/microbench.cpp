#include <benchmark/benchmark.h>

#include "qss/entropy.hpp"
#include "qss/field.hpp"
#include "qss/scheme.hpp"
#include "qss/sharing.hpp"
#include "qss/transport.hpp"

namespace {

void BM_FieldMul(benchmark::State& state) {
  const auto& f = qss::MersennePrime::get(static_cast<unsigned>(state.range(0)));
  qss::ChaChaEntropy e(1, 0);
  const auto a = f.random(e);
  auto b = f.random(e);
  for (auto _ : state) {
    b = a * b;
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_FieldMul)->Arg(521)->Arg(4253)->Arg(19937)->Arg(86243);

void BM_FieldInv(benchmark::State& state) {
  const auto& f = qss::MersennePrime::get(static_cast<unsigned>(state.range(0)));
  qss::ChaChaEntropy e(2, 0);
  const auto a = f.random(e);
  for (auto _ : state) benchmark::DoNotOptimize(a.inv());
}
BENCHMARK(BM_FieldInv)->Arg(521)->Arg(4253)->Arg(19937);

void BM_MakeShares(benchmark::State& state) {
  const auto& f = qss::MersennePrime::get(static_cast<unsigned>(state.range(0)));
  qss::ChaChaEntropy e(3, 0);
  const auto secret = f.random(e);
  for (auto _ : state) benchmark::DoNotOptimize(qss::make_shares(secret, 2, 4, e));
}
BENCHMARK(BM_MakeShares)->Arg(521)->Arg(19937);

void BM_RegisterFile(benchmark::State& state) {
  const auto& f = qss::MersennePrime::get(static_cast<unsigned>(state.range(0)));
  const qss::SchemeParams params(4, 1, f);
  qss::ChaChaEntropy e(4, 0);
  std::vector<std::uint8_t> data(6955, 0x5a);
  const auto password = qss::encode_password("correct horse", f);
  for (auto _ : state) benchmark::DoNotOptimize(qss::register_data(data, password, params, e, "owner", "bench"));
}
BENCHMARK(BM_RegisterFile)->Arg(521)->Arg(11213)->Unit(benchmark::kMillisecond);

void BM_WcTag(benchmark::State& state) {
  qss::ChaChaEntropy e(5, 0);
  std::vector<std::uint8_t> key(16), msg(static_cast<std::size_t>(state.range(0)));
  for (auto& b : key) b = static_cast<std::uint8_t>(e.next_u64());
  const auto wc = qss::WcKey::from_octets(key, qss::tag_field());
  for (auto _ : state) benchmark::DoNotOptimize(qss::wc_tag_octets(msg, wc));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_WcTag)->Arg(64)->Arg(1500);

void BM_SealFrame(benchmark::State& state) {
  auto key = std::make_shared<qss::KeyMaterial>();
  key->octets.resize(1 << 26);
  std::vector<std::uint8_t> msg(1496, 0x11);
  qss::KeystreamCursor cursor(key);
  for (auto _ : state) {
    if (cursor.remaining() < msg.size() + 16) {
      state.PauseTiming();
      cursor = qss::KeystreamCursor(key);
      state.ResumeTiming();
    }
    benchmark::DoNotOptimize(qss::seal(msg, {}, cursor, cursor));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * static_cast<std::int64_t>(msg.size()));
}
BENCHMARK(BM_SealFrame);

}  // namespace
BENCHMARK_MAIN();
