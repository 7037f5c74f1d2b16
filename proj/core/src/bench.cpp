#include "qss/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "qss/deployment.hpp"
#include "qss/entropy.hpp"
#include "qss/error.hpp"

namespace qss {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : (v[mid - 1] + v[mid]) / 2;
}

std::uint64_t octets_for(const KeySupply& supply, const std::string& data_id) {
  const auto records = supply.audit_log();
  const KeyStats stats = key_stats(records, {});
  const auto it = stats.by_data.find(data_id);
  if (it == stats.by_data.end()) return 0;
  std::uint64_t sum = 0;
  for (const auto& [phase, octets] : it->second) sum += octets;
  return sum;
}

}  // namespace

std::vector<std::uint64_t> default_bench_sizes() { return {6955, 13695, 46000}; }

std::vector<unsigned> default_bench_exponents() {
  return {521, 1279, 2203, 3217, 4253, 9941, 11213, 19937, 23209, 44497, 86243};
}

std::vector<BenchRow> run_bench(const BenchOptions& options) {
  if (options.repetitions == 0) fail(ErrorCode::kInvalidArgument, "need at least one repetition");
  using Clock = std::chrono::steady_clock;
  auto seconds = [](Clock::time_point a, Clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };

  ChaChaEntropy entropy(options.seed, 7);
  std::vector<BenchRow> rows;
  for (std::uint64_t size : options.sizes) {
    for (unsigned m : options.exponents) {
      DeploymentOptions d;
      d.config.n = options.n;
      d.config.t = options.t;
      d.config.m = m;
      d.config.rate_limit = 0;
      d.config.topology_seed = options.seed;
      d.tcp = options.tcp;
      LocalDeployment deployment(std::move(d));
      OwnerClient& owner = deployment.owner();

      BenchRow row;
      row.size = size;
      row.m = m;
      std::vector<double> reg, pre, rec;
      for (std::uint32_t rep = 0; rep < options.repetitions; ++rep) {
        std::vector<std::uint8_t> data(size);
        for (auto& b : data) b = static_cast<std::uint8_t>(entropy.next_u64());
        const std::string id = "bench-" + std::to_string(size) + "-" + std::to_string(m) + "-" + std::to_string(rep);

        const auto t0 = Clock::now();
        const RegisterResult r = owner.register_data(data, "bench passphrase", id);
        reg.push_back(seconds(t0, Clock::now()));

        PhaseTimes times;
        const ReconstructResult out = owner.reconstruct(id, "bench passphrase", {}, &times);
        if (out.data != data) fail(ErrorCode::kInternal, "benchmark reconstruction is not bit-exact");
        pre.push_back(times.precompute_s);
        rec.push_back(times.reconstruct_s);

        const std::uint64_t octets = octets_for(deployment.key_supply(), id);
        if (rep == 0) {
          row.blocks = r.blocks;
          row.key_octets = octets;
        } else if (octets != row.key_octets || r.blocks != row.blocks) {
          row.key_octets_stable = false;
        }
        owner.remove(id);
      }
      row.t_register = median(reg);
      row.t_precompute = median(pre);
      row.t_reconstruct = median(rec);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string bench_csv_header() { return "size,m,l,t_reg,t_pre,t_rec,key_octets"; }

std::string format_bench_row(const BenchRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%llu,%u,%llu,%.6f,%.6f,%.6f,%llu", static_cast<unsigned long long>(row.size), row.m,
                static_cast<unsigned long long>(row.blocks), row.t_register, row.t_precompute, row.t_reconstruct,
                static_cast<unsigned long long>(row.key_octets));
  return buf;
}

}  // namespace qss
