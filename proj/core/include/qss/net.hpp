#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace qss {

// Ordered, reliable, bidirectional byte stream.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void write(std::span<const std::uint8_t> bytes) = 0;
  // Blocks until `out` is full; fails with kTransport once the peer is gone.
  virtual void read_exact(std::span<std::uint8_t> out) = 0;
  virtual void close() = 0;
};

// "host:port" for TCP, any name for the in-process network.
using Endpoint = std::string;
using ConnectionHandler = std::function<void(std::unique_ptr<ByteStream>)>;

class Connector {
 public:
  virtual ~Connector() = default;
  // Fails with kPeerUnreachable when nobody listens.
  virtual std::unique_ptr<ByteStream> connect(const Endpoint& endpoint) = 0;
};

// Two connected in-memory stream ends.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_pipe();

enum class Direction : std::uint8_t { kToListener, kFromListener };
using TrafficTap = std::function<void(const Endpoint&, Direction, std::span<const std::uint8_t>)>;

// In-process network: every accepted connection is served on its own
// thread. Used for tests and benchmarks.
class LoopbackNetwork final : public Connector {
 public:
  LoopbackNetwork() = default;
  ~LoopbackNetwork() override;
  LoopbackNetwork(const LoopbackNetwork&) = delete;
  LoopbackNetwork& operator=(const LoopbackNetwork&) = delete;

  void listen(const Endpoint& endpoint, ConnectionHandler handler);
  // Refuses new connections and tears down the live ones.
  void unlisten(const Endpoint& endpoint);
  std::unique_ptr<ByteStream> connect(const Endpoint& endpoint) override;

  // Observes every byte written on connections opened after the call.
  void set_tap(TrafficTap tap);
  void shutdown();

 private:
  struct Connection;
  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  void reap_locked();

  std::mutex mu_;
  std::map<Endpoint, ConnectionHandler> listeners_;
  std::map<Endpoint, std::vector<std::weak_ptr<Connection>>> live_;
  std::vector<Worker> workers_;
  TrafficTap tap_;
  bool stopped_ = false;
};

class TcpConnector final : public Connector {
 public:
  std::unique_ptr<ByteStream> connect(const Endpoint& endpoint) override;
};

// Blocking accept loop, one thread per connection.
class TcpListener {
 public:
  explicit TcpListener(const Endpoint& bind_endpoint);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  // Returns after stop().
  void serve(const ConnectionHandler& handler);
  void stop();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<std::thread> workers_;
};

std::pair<std::string, std::uint16_t> split_host_port(const Endpoint& endpoint);

}  // namespace qss
