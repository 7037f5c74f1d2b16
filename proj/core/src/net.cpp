#include "qss/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <set>

#include "qss/error.hpp"

namespace qss {

namespace {

struct PipeState {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::uint8_t> inbox[2];
  bool closed = false;

  void close() {
    {
      std::lock_guard lock(mu);
      closed = true;
    }
    cv.notify_all();
  }
};

class PipeEnd final : public ByteStream {
 public:
  PipeEnd(std::shared_ptr<PipeState> state, int side) : state_(std::move(state)), side_(side) {}
  ~PipeEnd() override { close(); }

  void write(std::span<const std::uint8_t> bytes) override {
    {
      std::lock_guard lock(state_->mu);
      if (state_->closed) fail(ErrorCode::kTransport, "pipe closed");
      auto& box = state_->inbox[1 - side_];
      box.insert(box.end(), bytes.begin(), bytes.end());
    }
    state_->cv.notify_all();
  }

  void read_exact(std::span<std::uint8_t> out) override {
    std::unique_lock lock(state_->mu);
    auto& box = state_->inbox[side_];
    state_->cv.wait(lock, [&] { return box.size() >= out.size() || state_->closed; });
    if (box.size() < out.size()) fail(ErrorCode::kTransport, "pipe closed by peer");
    std::copy_n(box.begin(), out.size(), out.begin());
    box.erase(box.begin(), box.begin() + static_cast<std::ptrdiff_t>(out.size()));
  }

  void close() override { state_->close(); }

  const std::shared_ptr<PipeState>& state() const { return state_; }

 private:
  std::shared_ptr<PipeState> state_;
  int side_;
};

class TappedStream final : public ByteStream {
 public:
  TappedStream(std::unique_ptr<ByteStream> inner, TrafficTap tap, Endpoint endpoint, Direction writes)
      : inner_(std::move(inner)), tap_(std::move(tap)), endpoint_(std::move(endpoint)), writes_(writes) {}

  void write(std::span<const std::uint8_t> bytes) override {
    tap_(endpoint_, writes_, bytes);
    inner_->write(bytes);
  }
  void read_exact(std::span<std::uint8_t> out) override { inner_->read_exact(out); }
  void close() override { inner_->close(); }

 private:
  std::unique_ptr<ByteStream> inner_;
  TrafficTap tap_;
  Endpoint endpoint_;
  Direction writes_;
};

}  // namespace

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_pipe() {
  auto state = std::make_shared<PipeState>();
  return {std::make_unique<PipeEnd>(state, 0), std::make_unique<PipeEnd>(state, 1)};
}

struct LoopbackNetwork::Connection {
  std::shared_ptr<PipeState> state;
};

LoopbackNetwork::~LoopbackNetwork() { shutdown(); }

void LoopbackNetwork::listen(const Endpoint& endpoint, ConnectionHandler handler) {
  std::lock_guard lock(mu_);
  listeners_[endpoint] = std::move(handler);
}

void LoopbackNetwork::unlisten(const Endpoint& endpoint) {
  std::vector<std::shared_ptr<Connection>> to_close;
  {
    std::lock_guard lock(mu_);
    listeners_.erase(endpoint);
    for (auto& weak : live_[endpoint]) {
      if (auto c = weak.lock()) to_close.push_back(std::move(c));
    }
    live_.erase(endpoint);
  }
  for (auto& c : to_close) c->state->close();
}

void LoopbackNetwork::set_tap(TrafficTap tap) {
  std::lock_guard lock(mu_);
  tap_ = std::move(tap);
}

void LoopbackNetwork::reap_locked() {
  std::vector<Worker> keep;
  for (auto& w : workers_) {
    if (w.done->load()) {
      if (w.thread.joinable()) w.thread.join();
    } else {
      keep.push_back(std::move(w));
    }
  }
  workers_ = std::move(keep);
}

std::unique_ptr<ByteStream> LoopbackNetwork::connect(const Endpoint& endpoint) {
  std::unique_lock lock(mu_);
  if (stopped_) fail(ErrorCode::kPeerUnreachable, "network shut down");
  reap_locked();
  auto it = listeners_.find(endpoint);
  if (it == listeners_.end()) fail(ErrorCode::kPeerUnreachable, "nothing listens on " + endpoint);
  ConnectionHandler handler = it->second;

  auto [client_end, server_end] = make_pipe();
  auto connection = std::make_shared<Connection>();
  connection->state = static_cast<PipeEnd&>(*client_end).state();
  auto& live = live_[endpoint];
  std::erase_if(live, [](const std::weak_ptr<Connection>& w) { return w.expired(); });
  live.push_back(connection);

  std::unique_ptr<ByteStream> server_stream = std::move(server_end);
  std::unique_ptr<ByteStream> client_stream = std::move(client_end);
  if (tap_) {
    server_stream = std::make_unique<TappedStream>(std::move(server_stream), tap_, endpoint, Direction::kFromListener);
    client_stream = std::make_unique<TappedStream>(std::move(client_stream), tap_, endpoint, Direction::kToListener);
  }

  auto done = std::make_shared<std::atomic<bool>>(false);
  std::thread worker([handler = std::move(handler), stream = std::move(server_stream), done, connection]() mutable {
    try {
      handler(std::move(stream));
    } catch (...) {
    }
    connection->state->close();
    done->store(true);
  });
  workers_.push_back(Worker{std::move(worker), done});
  return client_stream;
}

void LoopbackNetwork::shutdown() {
  std::vector<Worker> workers;
  std::vector<std::shared_ptr<Connection>> to_close;
  {
    std::lock_guard lock(mu_);
    stopped_ = true;
    listeners_.clear();
    for (auto& [ep, list] : live_) {
      for (auto& weak : list) {
        if (auto c = weak.lock()) to_close.push_back(std::move(c));
      }
    }
    live_.clear();
    workers = std::move(workers_);
    workers_.clear();
  }
  for (auto& c : to_close) c->state->close();
  for (auto& w : workers) {
    if (w.thread.joinable()) w.thread.join();
  }
}

// --- TCP ---------------------------------------------------------------------

namespace {

class TcpStream final : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpStream() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void write(std::span<const std::uint8_t> bytes) override {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(ErrorCode::kTransport, std::string("send: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  void read_exact(std::span<std::uint8_t> out) override {
    std::size_t got = 0;
    while (got < out.size()) {
      const ssize_t n = ::recv(fd_, out.data() + got, out.size() - got, 0);
      if (n == 0) fail(ErrorCode::kTransport, "connection closed by peer");
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(ErrorCode::kTransport, std::string("recv: ") + std::strerror(errno));
      }
      got += static_cast<std::size_t>(n);
    }
  }

  void close() override {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_;
};

}  // namespace

std::pair<std::string, std::uint16_t> split_host_port(const Endpoint& endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos) fail(ErrorCode::kConfig, "endpoint '" + endpoint + "' is not host:port");
  const std::string host = endpoint.substr(0, colon);
  const std::string port = endpoint.substr(colon + 1);
  try {
    const unsigned long p = std::stoul(port);
    if (p > 65535) throw std::out_of_range("port");
    return {host.empty() ? "127.0.0.1" : host, static_cast<std::uint16_t>(p)};
  } catch (const std::exception&) {
    fail(ErrorCode::kConfig, "endpoint '" + endpoint + "' has an invalid port");
  }
}

std::unique_ptr<ByteStream> TcpConnector::connect(const Endpoint& endpoint) {
  const auto [host, port] = split_host_port(endpoint);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port_str = std::to_string(port);
  if (::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) != 0 || res == nullptr) {
    fail(ErrorCode::kPeerUnreachable, "cannot resolve " + endpoint);
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) fail(ErrorCode::kPeerUnreachable, "cannot connect to " + endpoint);
  return std::make_unique<TcpStream>(fd);
}

TcpListener::TcpListener(const Endpoint& bind_endpoint) {
  const auto [host, port] = split_host_port(bind_endpoint);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) fail(ErrorCode::kIo, "socket failed");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    fail(ErrorCode::kConfig, "listen address must be an IPv4 literal: " + host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 64) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd_);
    fail(ErrorCode::kIo, "cannot listen on " + bind_endpoint + ": " + err);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  stop();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    workers = std::move(workers_);
  }
  for (auto& t : workers) {
    if (t.joinable()) t.join();
  }
}

void TcpListener::serve(const ConnectionHandler& handler) {
  while (!stopping_.load()) {
    const int client = ::accept(fd_, nullptr, nullptr);
    if (client < 0) {
      if (errno == EINTR) continue;
      break;
    }
    std::lock_guard lock(mu_);
    workers_.emplace_back([handler, client] {
      try {
        handler(std::make_unique<TcpStream>(client));
      } catch (...) {
      }
    });
  }
}

void TcpListener::stop() {
  if (stopping_.exchange(true)) return;
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

}  // namespace qss
