// Key daemon: simulated key relay network plus the application-facing key supply.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <mutex>

#include "qss/config.hpp"
#include "qss/deployment.hpp"
#include "qss/error.hpp"
#include "qss/key_client.hpp"
#include "qss/key_supply.hpp"
#include "stop_signal.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Key supply daemon over a simulated trusted-node network"};
  std::string config_path, bind, audit_path;
  app.add_option("--config", config_path, "key=value configuration file")->required();
  app.add_option("--bind", bind, "listen endpoint (default: ksa from the config)");
  app.add_option("--audit-log", audit_path, "append-only audit log (default: audit_log from the config)");
  CLI11_PARSE(app, argc, argv);

  try {
    qss::Config config = qss::load_config(config_path);
    if (bind.empty()) bind = config.ksa;
    if (bind.empty()) qss::fail(qss::ErrorCode::kConfig, "no listen endpoint");
    if (audit_path.empty()) audit_path = config.audit_log.string();
    if (config.bootstrap_secret.empty()) qss::fail(qss::ErrorCode::kConfig, "bootstrap_secret is not configured");

    qss::TopologyConfig topo = qss::topology_for(config, qss::default_topology());
    const qss::Directory directory = qss::assign_nodes(config, topo);
    if (!config.state_dir.empty()) topo.store_dir = config.state_dir / "keyd";
    qss::KeySupply supply(std::move(topo));

    std::ofstream audit;
    std::mutex audit_mu;
    if (!audit_path.empty()) {
      audit.open(audit_path, std::ios::app);
      if (!audit) qss::fail(qss::ErrorCode::kIo, "cannot open audit log " + audit_path);
      supply.set_audit_sink([&](const qss::AuditRecord& r) {
        std::lock_guard lock(audit_mu);
        audit << qss::format_audit_line(r) << std::endl;
      });
    }

    qss::KeyService service(supply, directory, config.bootstrap_secret);
    qss::TcpListener listener(bind);
    std::thread stopper = watch_stop_signals([&] { listener.stop(); });
    std::cerr << "key daemon listening on port " << listener.port() << "\n";
    listener.serve([&](std::unique_ptr<qss::ByteStream> s) { service.serve(std::move(s)); });
    stopper.join();
    return 0;
  } catch (const qss::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == qss::ErrorCode::kConfig ? 4 : 1;
  }
}
