#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "qss/channel.hpp"
#include "qss/deployment.hpp"
#include "qss/entropy.hpp"
#include "qss/error.hpp"
#include "qss/messages.hpp"
#include "qss/scheme.hpp"

namespace qss_test {

template <typename Fn>
qss::ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const qss::Error& e) {
    return e.code();
  }
  return qss::ErrorCode{};
}

// A unique directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& stem) {
    static std::atomic<unsigned> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (stem + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline qss::DeploymentOptions small_options(std::uint32_t n = 4, std::uint32_t t = 1, unsigned m = 521) {
  qss::DeploymentOptions o;
  o.config.n = n;
  o.config.t = t;
  o.config.m = m;
  o.config.rate_limit = 0;
  o.config.topology_seed = 7;
  return o;
}

inline std::vector<std::uint8_t> random_bytes(std::size_t n, std::uint64_t seed) {
  qss::ChaChaEntropy e(seed, 0);
  std::vector<std::uint8_t> out(n);
  e.fill(out);
  return out;
}

// One request/reply exchange with server j, speaking as the data owner.
inline qss::Message owner_call(qss::LocalDeployment& d, std::uint32_t j, qss::MsgType type,
                               const std::vector<std::uint8_t>& body, const std::string& purpose) {
  auto stream = d.connector().connect(d.config().servers.at(j));
  qss::KsaPads pads(d.owner_keys());
  qss::SecureChannel channel(*stream, pads, qss::kOwnerParty, static_cast<std::uint16_t>(j),
                             qss::SecureChannel::fresh_session(), &d.pad_audit());
  channel.send(static_cast<std::uint8_t>(type), body, purpose);
  qss::Message reply = channel.receive();
  stream->close();
  return reply;
}

// Hand-driven reconstruction attempt: request shares of `guess` to every
// member of `quorum`, raw responses back.
inline std::vector<qss::ReconResponse> request_round(qss::LocalDeployment& d, const std::string& data_id,
                                                     std::string_view guess, const qss::Quorum& quorum,
                                                     std::uint64_t attempt_id, qss::EntropySource& entropy,
                                                     qss::SlotId floor = {}) {
  const qss::SchemeParams params = d.config().params();
  const auto reqs =
      qss::make_request(qss::encode_password(guess, params.prime()), params, quorum, entropy, data_id, attempt_id);
  std::vector<qss::ReconResponse> out;
  for (const auto& r : reqs) {
    qss::ReconRequest msg{d.config().owner_id, data_id, attempt_id, floor, quorum, d.config().m, r.password_share};
    const auto reply =
        owner_call(d, r.point, qss::MsgType::kReconRequest, qss::encode(msg), qss::purpose_tag("reconstruct", data_id));
    qss::check_reply(reply.type, reply.body, qss::MsgType::kReconResponse);
    out.push_back(qss::decode_recon_response(reply.body));
  }
  return out;
}

inline std::vector<std::uint8_t> decode_responses(const qss::LocalDeployment& d,
                                                  const std::vector<qss::ReconResponse>& responses,
                                                  std::string_view password) {
  const qss::SchemeParams params = d.config().params();
  std::vector<qss::ReconstructionResponse> rs;
  for (const auto& r : responses) rs.push_back({r.point, r.values});
  const auto bv = qss::reconstruct(rs, params, responses.front().byte_length);
  return qss::verify_and_decode(bv, qss::encode_password(password, params.prime()));
}

}  // namespace qss_test
