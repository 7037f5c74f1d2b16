#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "qss/channel.hpp"
#include "qss/key_supply.hpp"

namespace qss {

// Application-side access to its KSA.
class KeyClient {
 public:
  virtual ~KeyClient() = default;
  // Key shared with `peer`; the peer fetches its copy by id.
  virtual KeyFile request(std::uint16_t peer, std::uint64_t octets, const std::string& purpose) = 0;
  virtual KeyFile fetch(const KeyId& id) = 0;
};

class LocalKeyClient final : public KeyClient {
 public:
  LocalKeyClient(KeySupply& supply, Directory directory, std::uint16_t self);

  KeyFile request(std::uint16_t peer, std::uint64_t octets, const std::string& purpose) override;
  KeyFile fetch(const KeyId& id) override;

 private:
  KeySupply& supply_;
  Directory directory_;
  Party self_;
};

// Talks to a key daemon over bootstrap-padded frames. Thread-safe; keeps
// one connection and reconnects under a fresh session after an error.
class RemoteKeyClient final : public KeyClient {
 public:
  RemoteKeyClient(Connector& connector, Endpoint endpoint, std::vector<std::uint8_t> bootstrap_secret,
                  std::uint16_t self);
  ~RemoteKeyClient() override;

  KeyFile request(std::uint16_t peer, std::uint64_t octets, const std::string& purpose) override;
  KeyFile fetch(const KeyId& id) override;

 private:
  struct Session;
  KeyFile call(std::uint8_t type, const std::vector<std::uint8_t>& body);

  Connector& connector_;
  Endpoint endpoint_;
  std::vector<std::uint8_t> secret_;
  std::uint16_t self_;
  std::mutex mu_;
  std::unique_ptr<Session> session_;
};

// Pads drawn from the key supply: every message gets its own key file.
class KsaPads final : public PadProvider {
 public:
  explicit KsaPads(KeyClient& client) : client_(client) {}

  std::shared_ptr<const KeyMaterial> allocate(std::uint16_t peer, std::uint64_t octets,
                                              const std::string& purpose) override;
  std::shared_ptr<const KeyMaterial> lookup(std::uint16_t peer, const KeyId& id, std::uint64_t min_length) override;

 private:
  KeyClient& client_;
};

// Serves KSA requests for remote applications on top of a KeySupply.
class KeyService {
 public:
  KeyService(KeySupply& supply, Directory directory, std::vector<std::uint8_t> bootstrap_secret);

  // Runs one connection until the peer hangs up.
  void serve(std::unique_ptr<ByteStream> stream);

 private:
  KeySupply& supply_;
  Directory directory_;
  std::vector<std::uint8_t> secret_;
  std::mutex mu_;
  std::set<std::pair<std::uint16_t, std::uint64_t>> sessions_;
};

std::vector<std::uint8_t> encode_ksa_request(std::uint16_t peer, std::uint64_t octets, const std::string& purpose);

}  // namespace qss
