// Storage server daemon.
#include <CLI11.hpp>

#include <iostream>

#include "qss/config.hpp"
#include "qss/deployment.hpp"
#include "qss/error.hpp"
#include "qss/key_client.hpp"
#include "qss/server.hpp"
#include "stop_signal.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Storage server holding data and password shares"};
  std::string config_path, bind;
  std::uint32_t index = 0;
  app.add_option("--config", config_path, "key=value configuration file")->required();
  app.add_option("--index", index, "this server's index j")->required();
  app.add_option("--bind", bind, "listen endpoint (default: server.<j> from the config)");
  CLI11_PARSE(app, argc, argv);

  try {
    const qss::Config config = qss::load_config(config_path);
    const qss::SchemeParams params = config.params();
    if (index == 0 || index > params.n) qss::fail(qss::ErrorCode::kConfig, "--index must be within 1..n");
    if (bind.empty()) {
      const auto it = config.servers.find(index);
      if (it == config.servers.end()) qss::fail(qss::ErrorCode::kConfig, "no endpoint for this server");
      bind = it->second;
    }
    if (config.ksa.empty()) qss::fail(qss::ErrorCode::kConfig, "ksa endpoint is not configured");

    qss::TcpConnector connector;
    qss::RemoteKeyClient keys(connector, config.ksa, config.bootstrap_secret, static_cast<std::uint16_t>(index));
    qss::StorageServer server(qss::server_config_for(config, index), connector, keys);
    qss::TcpListener listener(bind);
    std::thread stopper = watch_stop_signals([&] { listener.stop(); });
    std::cerr << "server " << index << " listening on port " << listener.port() << "\n";
    listener.serve([&](std::unique_ptr<qss::ByteStream> s) { server.serve(std::move(s)); });
    stopper.join();
    return 0;
  } catch (const qss::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == qss::ErrorCode::kConfig ? 4 : 1;
  }
}
