#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qss {

// The data sizes and Mersenne exponents of the reference experiment.
std::vector<std::uint64_t> default_bench_sizes();
std::vector<unsigned> default_bench_exponents();

struct BenchOptions {
  std::vector<std::uint64_t> sizes = default_bench_sizes();
  std::vector<unsigned> exponents = default_bench_exponents();
  std::uint32_t n = 4;
  std::uint32_t t = 1;
  std::uint32_t repetitions = 5;
  bool tcp = false;  // real sockets instead of the in-process network
  std::uint64_t seed = 1;
};

struct BenchRow {
  std::uint64_t size = 0;
  unsigned m = 0;
  std::uint64_t blocks = 0;  // as reported by registration
  double t_register = 0;     // medians, seconds
  double t_precompute = 0;
  double t_reconstruct = 0;
  std::uint64_t key_octets = 0;
  // False if the key octets differed between repetitions.
  bool key_octets_stable = true;
};

// One deployment per (size, m); each repetition registers, precomputes and
// reconstructs a fresh data item and checks the result is bit-exact.
std::vector<BenchRow> run_bench(const BenchOptions& options);

std::string bench_csv_header();
std::string format_bench_row(const BenchRow& row);

}  // namespace qss
