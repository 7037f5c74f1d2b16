// Owner tool: register, reconstruct, keystats.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <iterator>

#include "qss/client.hpp"
#include "qss/config.hpp"
#include "qss/error.hpp"
#include "qss/key_client.hpp"
#include "qss/net.hpp"

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) qss::fail(qss::ErrorCode::kIo, "cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) qss::fail(qss::ErrorCode::kIo, "cannot write " + path);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    if (comma > start) out.push_back(text.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Password-protected secret storage across threshold servers"};
  app.require_subcommand(1);

  std::string config_path, servers, state_path, quorum, out_path, data_id, input;
  std::optional<unsigned> m;
  std::optional<std::uint32_t> n, t;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--servers", servers, "comma-separated server endpoints, server 1 first");
  app.add_option("--m", m, "Mersenne exponent");
  app.add_option("--n", n, "number of servers");
  app.add_option("--t", t, "tolerated corrupted servers");
  app.add_option("--state", state_path, "owner state file (default <state_dir>/owner.state)");

  auto* reg = app.add_subcommand("register", "share a file across all servers");
  reg->add_option("file", input, "file to store")->required();
  reg->add_option("--data-id", data_id, "identifier (default: random)");
  bool overwrite = false;
  reg->add_flag("--overwrite", overwrite, "replace an existing item with the same id");

  auto* rec = app.add_subcommand("reconstruct", "recover a file with its passphrase");
  rec->add_option("--data-id", data_id, "identifier printed at registration")->required();
  rec->add_option("--out", out_path, "output file")->required();
  rec->add_option("--quorum", quorum, "comma-separated server indices, 2t + 1 of them");

  app.add_subcommand("keystats", "key octets consumed per phase, from the key daemon's audit log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 4;
  }

  try {
    qss::Config config;
    if (!config_path.empty()) config = qss::load_config(config_path);
    if (m) config.m = *m;
    if (n) config.n = *n;
    if (t) config.t = *t;
    if (!servers.empty()) {
      const auto list = split_list(servers);
      config.servers.clear();
      for (std::size_t i = 0; i < list.size(); ++i) config.servers[static_cast<std::uint32_t>(i + 1)] = list[i];
    }
    (void)config.params();

    std::filesystem::path state_file = state_path;
    if (state_file.empty()) state_file = (config.state_dir.empty() ? "." : config.state_dir) / "owner.state";
    qss::OwnerState state(state_file);

    if (app.got_subcommand("keystats")) {
      if (config.audit_log.empty()) qss::fail(qss::ErrorCode::kConfig, "audit_log is not configured");
      std::vector<qss::AuditRecord> records;
      if (std::filesystem::exists(config.audit_log)) records = qss::read_audit_log(config.audit_log);
      std::map<std::string, std::uint64_t> sizes;
      for (const auto& [id, entry] : state.entries()) sizes[id] = entry.byte_length;
      std::cout << qss::format_key_stats(qss::key_stats(records, sizes));
      return 0;
    }

    if (config.ksa.empty()) qss::fail(qss::ErrorCode::kConfig, "ksa endpoint is not configured");
    qss::TcpConnector connector;
    qss::RemoteKeyClient keys(connector, config.ksa, config.bootstrap_secret, qss::kOwnerParty);
    qss::OwnerClient client(config, connector, keys, &state);

    if (app.got_subcommand("register")) {
      const auto data = read_file(input);
      const std::string pass = qss::obtain_passphrase("Passphrase: ");
      if (qss::estimate_password_bits(pass) < config.min_password_bits) {
        std::cerr << "warning: passphrase looks weak; on-line guessing is only slowed by server rate limits\n";
      }
      const auto r = client.register_data(data, pass, data_id.empty() ? std::nullopt : std::optional(data_id), overwrite);
      std::cerr << "stored " << r.byte_length << " bytes as " << r.blocks << " blocks plus MAC\n";
      std::cout << r.data_id << "\n";
      return 0;
    }

    qss::ReconstructOptions options;
    if (!quorum.empty()) options.quorum = qss::parse_index_list(quorum);
    const std::string pass = qss::obtain_passphrase("Passphrase: ");
    const auto r = client.reconstruct(data_id, pass, options);
    write_file(out_path, r.data);
    std::cerr << "recovered " << r.data.size() << " bytes\n";
    return 0;
  } catch (const qss::Error& e) {
    if (e.code() == qss::ErrorCode::kAuthenticationFailed) {
      std::cerr << "authentication failed\n";
    } else {
      std::cerr << "error: " << e.what() << "\n";
    }
    return qss::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
