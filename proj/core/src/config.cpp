#include "qss/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include "qss/error.hpp"
#include "qss/wire.hpp"

namespace qss {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) fail(ErrorCode::kConfig, "bad number for '" + key + "': " + value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  fail(ErrorCode::kConfig, "bad boolean for '" + key + "': " + value);
}

}  // namespace

SchemeParams Config::params() const {
  if (!MersennePrime::is_known(m)) fail(ErrorCode::kConfig, "m = " + std::to_string(m) + " is not a supported exponent");
  SchemeParams p(n, t, MersennePrime::get(m));
  p.validate();
  return p;
}

void apply_setting(Config& c, const std::string& key, const std::string& value) {
  if (key == "n") {
    c.n = parse_number<std::uint32_t>(key, value);
  } else if (key == "t") {
    c.t = parse_number<std::uint32_t>(key, value);
  } else if (key == "m") {
    c.m = parse_number<unsigned>(key, value);
  } else if (key == "owner_id") {
    if (value.empty()) fail(ErrorCode::kConfig, "owner_id is empty");
    c.owner_id = value;
  } else if (key == "owner.node") {
    c.owner_node = parse_number<NodeId>(key, value);
  } else if (key == "ksa") {
    c.ksa = value;
  } else if (key == "bootstrap_secret") {
    try {
      c.bootstrap_secret = from_hex(value);
    } catch (const Error&) {
      fail(ErrorCode::kConfig, "bootstrap_secret must be hex");
    }
  } else if (key == "audit_log") {
    c.audit_log = value;
  } else if (key == "state_dir") {
    c.state_dir = value;
  } else if (key == "pool_mode") {
    if (value == "per_quorum") {
      c.pool_mode = PoolMode::kPerQuorum;
    } else if (value == "all_servers") {
      c.pool_mode = PoolMode::kAllServers;
    } else {
      fail(ErrorCode::kConfig, "pool_mode must be per_quorum or all_servers");
    }
  } else if (key == "precompute_batch") {
    c.precompute_batch = parse_number<std::uint32_t>(key, value);
    if (c.precompute_batch == 0) fail(ErrorCode::kConfig, "precompute_batch must be positive");
  } else if (key == "rate_limit") {
    c.rate_limit = parse_number<std::uint32_t>(key, value);
  } else if (key == "rate_window_ms") {
    c.rate_window_ms = parse_number<TimeMs>(key, value);
  } else if (key == "topology_seed") {
    c.topology_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "min_password_bits") {
    c.min_password_bits = parse_number<double>(key, value);
  } else if (key == "key_ttl_ms") {
    c.key_ttl_ms = parse_number<TimeMs>(key, value);
  } else if (key == "deterministic_keys") {
    // Shorthand for a fixed topology seed.
    if (parse_bool(key, value) && !c.topology_seed) c.topology_seed = 1;
  } else if (key.rfind("server.", 0) == 0) {
    const std::string rest = key.substr(7);
    const auto dot = rest.find('.');
    const auto index = parse_number<std::uint32_t>(key, rest.substr(0, dot));
    if (index == 0) fail(ErrorCode::kConfig, "server indices start at 1");
    if (dot == std::string::npos) {
      c.servers[index] = value;
    } else if (rest.substr(dot + 1) == "node") {
      c.server_nodes[index] = parse_number<NodeId>(key, value);
    } else {
      fail(ErrorCode::kConfig, "unknown setting '" + key + "'");
    }
  } else {
    fail(ErrorCode::kConfig, "unknown setting '" + key + "'");
  }
}

Config parse_config(std::istream& in) {
  Config c;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kConfig, "line " + std::to_string(number) + ": expected key = value");
    }
    apply_setting(c, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot read config " + path.string());
  return parse_config(in);
}

std::vector<std::uint32_t> parse_index_list(const std::string& text) {
  std::vector<std::uint32_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = trim(text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (item.empty()) fail(ErrorCode::kConfig, "empty entry in index list '" + text + "'");
    out.push_back(parse_number<std::uint32_t>("index list", item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace qss
