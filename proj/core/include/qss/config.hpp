#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qss/key_file.hpp"
#include "qss/net.hpp"
#include "qss/scheme.hpp"

namespace qss {

// Deployment settings shared by the owner tool, the server daemon and the
// key daemon. Read from a line-oriented key=value file:
//
//   n = 4
//   t = 1
//   m = 521
//   server.1 = 127.0.0.1:7001
//   server.1.node = 1
//   ksa = 127.0.0.1:7000
//   bootstrap_secret = <hex>
//
// Blank lines and lines starting with '#' are ignored.
struct Config {
  std::uint32_t n = 4;
  std::uint32_t t = 1;
  unsigned m = 521;
  std::string owner_id = "owner";
  NodeId owner_node = 1;

  std::map<std::uint32_t, Endpoint> servers;
  std::map<std::uint32_t, NodeId> server_nodes;

  Endpoint ksa;
  std::vector<std::uint8_t> bootstrap_secret;
  std::filesystem::path audit_log;
  std::filesystem::path state_dir;

  PoolMode pool_mode = PoolMode::kPerQuorum;
  std::uint32_t precompute_batch = 1;
  std::uint32_t rate_limit = 10;
  TimeMs rate_window_ms = 3'600'000;

  std::optional<std::uint64_t> topology_seed;
  TimeMs key_ttl_ms = 3'600'000;
  // The owner tool warns about passphrases estimated below this.
  double min_password_bits = 40;

  SchemeParams params() const;
};

Config parse_config(std::istream& in);
Config load_config(const std::filesystem::path& path);
// Applies one key=value setting; fails with kConfig on unknown keys or bad values.
void apply_setting(Config& config, const std::string& key, const std::string& value);

// Comma-separated server indices, e.g. "1,2,4".
std::vector<std::uint32_t> parse_index_list(const std::string& text);

}  // namespace qss
