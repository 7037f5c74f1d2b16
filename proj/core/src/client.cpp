#include "qss/client.hpp"

#include <termios.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "qss/error.hpp"
#include "qss/wire.hpp"

namespace qss {

// --- owner state -------------------------------------------------------------

OwnerState::OwnerState(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(file_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string id;
    OwnedData d;
    if (fields >> id >> d.byte_length >> d.floor.round >> d.floor.slot) entries_[id] = d;
  }
}

std::optional<OwnedData> OwnerState::get(const std::string& data_id) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(data_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void OwnerState::put(const std::string& data_id, const OwnedData& entry) {
  std::lock_guard lock(mu_);
  entries_[data_id] = entry;
  save();
}

void OwnerState::erase(const std::string& data_id) {
  std::lock_guard lock(mu_);
  entries_.erase(data_id);
  save();
}

std::map<std::string, OwnedData> OwnerState::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

void OwnerState::save() const {
  if (file_.empty()) return;
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  const auto tmp = std::filesystem::path(file_.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp.string());
    out << "# data-id size floor-round floor-slot\n";
    for (const auto& [id, d] : entries_) {
      out << id << ' ' << d.byte_length << ' ' << d.floor.round << ' ' << d.floor.slot << '\n';
    }
  }
  std::filesystem::rename(tmp, file_);
}

// --- owner client ------------------------------------------------------------

OwnerClient::OwnerClient(Config config, Connector& connector, KeyClient& keys, OwnerState* state)
    : config_(std::move(config)),
      params_(config_.params()),
      connector_(connector),
      keys_(keys),
      state_(state ? state : &scratch_) {
  for (std::uint32_t j = 1; j <= params_.n; ++j) {
    if (!config_.servers.count(j)) fail(ErrorCode::kConfig, "no endpoint for server " + std::to_string(j));
  }
}

std::string OwnerClient::fresh_data_id() {
  SystemEntropy os;
  std::array<std::uint8_t, 8> id{};
  os.fill(id);
  return to_hex(id);
}

Message OwnerClient::call(std::uint32_t server, MsgType type, const std::vector<std::uint8_t>& body,
                          const std::string& purpose) {
  auto stream = connector_.connect(config_.servers.at(server));
  KsaPads pads(keys_);
  SecureChannel channel(*stream, pads, kOwnerParty, static_cast<std::uint16_t>(server), SecureChannel::fresh_session(),
                        audit_);
  try {
    channel.send(static_cast<std::uint8_t>(type), body, purpose);
    Message reply = channel.receive();
    stream->close();
    return reply;
  } catch (const Error& e) {
    stream->close();
    if (e.code() == ErrorCode::kTransport) throw Error(ErrorCode::kPeerUnreachable, e.detail());
    throw;
  }
}

RegisterResult OwnerClient::register_data(std::span<const std::uint8_t> data, std::string_view passphrase,
                                          std::optional<std::string> data_id, bool overwrite) {
  if (data.empty()) fail(ErrorCode::kInvalidArgument, "cannot register empty data");
  // Encoding first: an oversized passphrase is refused before any traffic.
  const FieldElement password = encode_password(passphrase, params_.prime());
  const std::string id = data_id ? *data_id : fresh_data_id();
  if (id.empty() || id.find_first_of(" \t\n:") != std::string::npos) {
    fail(ErrorCode::kInvalidArgument, "data id must be non-empty and free of spaces and colons");
  }

  SystemEntropy entropy;
  auto bundles = qss::register_data(data, password, params_, entropy, config_.owner_id, id);
  const std::string purpose = purpose_tag("register", id);

  std::vector<std::future<void>> pending;
  for (auto& bundle : bundles) {
    pending.push_back(std::async(std::launch::async, [&, j = bundle.server] {
      StoreShares msg{params_.n, params_.t, params_.prime().exponent(), overwrite, std::move(bundle)};
      const Message reply = call(j, MsgType::kStoreShares, encode(msg), purpose);
      check_reply(reply.type, reply.body, MsgType::kAck);
    }));
  }
  std::vector<std::uint32_t> stored;
  std::optional<Error> failure;
  for (std::uint32_t j = 1; j <= pending.size(); ++j) {
    try {
      pending[j - 1].get();
      stored.push_back(j);
    } catch (const Error& e) {
      if (!failure) failure = Error(e.code(), "server " + std::to_string(j) + ": " + e.detail());
    }
  }
  if (failure) {
    // Roll back so no server keeps a bundle of an incomplete registration.
    for (std::uint32_t j : stored) {
      try {
        call(j, MsgType::kDeleteShares, encode(DeleteShares{config_.owner_id, id}), purpose);
      } catch (const Error&) {
      }
    }
    throw *failure;
  }

  state_->put(id, OwnedData{data.size(), SlotId{}});
  return RegisterResult{id, data.size(), block_count(data.size(), params_.prime().exponent())};
}

std::uint32_t OwnerClient::remove(const std::string& data_id) {
  std::uint32_t held = 0;
  std::optional<Error> failure;
  for (std::uint32_t j = 1; j <= params_.n; ++j) {
    try {
      const Message reply = call(j, MsgType::kDeleteShares, encode(DeleteShares{config_.owner_id, data_id}),
                                 purpose_tag("register", data_id));
      check_reply(reply.type, reply.body, MsgType::kAck);
      held += decode_ack(reply.body).value != 0 ? 1 : 0;
    } catch (const Error& e) {
      if (!failure) failure = e;
    }
  }
  if (failure) throw *failure;
  state_->erase(data_id);
  return held;
}

Quorum OwnerClient::pick_quorum(const std::vector<std::uint32_t>& excluded) const {
  Quorum out;
  for (std::uint32_t j = 1; j <= params_.n && out.size() < params_.quorum_size(); ++j) {
    if (std::find(excluded.begin(), excluded.end(), j) == excluded.end()) out.push_back(j);
  }
  if (out.size() < params_.quorum_size()) {
    fail(ErrorCode::kPeerUnreachable, "fewer than " + std::to_string(params_.quorum_size()) + " servers reachable");
  }
  return out;
}

Quorum OwnerClient::pool_key_for(const Quorum& quorum) const {
  return config_.pool_mode == PoolMode::kPerQuorum ? quorum : params_.all_servers();
}

ReconstructResult OwnerClient::reconstruct(const std::string& data_id, std::string_view passphrase,
                                           const ReconstructOptions& options, PhaseTimes* times) {
  const FieldElement guess = encode_password(passphrase, params_.prime());
  std::vector<std::uint32_t> excluded;
  Quorum quorum;
  if (options.quorum) {
    quorum = normalize_quorum(*options.quorum, params_);
    check_quorum_size(quorum, params_);
  }
  OwnedData known = state_->get(data_id).value_or(OwnedData{});
  const auto elapsed = [](auto start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  SystemEntropy entropy;
  std::optional<Error> last;
  for (std::uint32_t attempt = 1; attempt <= options.max_attempts; ++attempt) {
    if (!options.quorum) quorum = pick_quorum(excluded);
    const Quorum key = pool_key_for(quorum);

    if (options.ensure_first) {
      const auto start = std::chrono::steady_clock::now();
      try {
        const Message reply = call(key.front(), MsgType::kPrecompEnsure,
                                   encode(PrecompEnsure{config_.owner_id, data_id, key, known.floor}),
                                   purpose_tag("precompute", data_id));
        check_reply(reply.type, reply.body, MsgType::kAck);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kPeerUnreachable && !options.quorum) {
          excluded.push_back(key.front());
          last = e;
          continue;
        }
        // A failed round is retried; the servers also precompute lazily.
        if (!e.retryable()) throw;
        last = e;
      }
      if (times) times->precompute_s += elapsed(start);
    }

    const auto start = std::chrono::steady_clock::now();
    std::uint64_t attempt_id = entropy.next_u64();
    const auto requests = make_request(guess, params_, quorum, entropy, data_id, attempt_id);
    std::vector<std::future<ReconResponse>> pending;
    for (const auto& r : requests) {
      ReconRequest msg{config_.owner_id, data_id, attempt_id, known.floor, quorum, params_.prime().exponent(),
                       r.password_share};
      pending.push_back(std::async(std::launch::async, [this, j = r.point, body = encode(msg), &data_id] {
        const Message reply = call(j, MsgType::kReconRequest, body, purpose_tag("reconstruct", data_id));
        check_reply(reply.type, reply.body, MsgType::kReconResponse);
        return decode_recon_response(reply.body);
      }));
    }

    std::vector<ReconstructionResponse> responses;
    std::vector<SlotId> slots;
    std::uint64_t byte_length = 0;
    std::optional<Error> failure;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      try {
        ReconResponse r = pending[i].get();
        if (r.point != quorum[i] || r.m != params_.prime().exponent()) {
          fail(ErrorCode::kMalformed, "response from server " + std::to_string(quorum[i]) + " is inconsistent");
        }
        if (!responses.empty() && r.byte_length != byte_length) fail(ErrorCode::kMalformed, "servers disagree on size");
        byte_length = r.byte_length;
        slots.push_back(r.slot);
        responses.push_back(ReconstructionResponse{r.point, std::move(r.values)});
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kPeerUnreachable && !options.quorum) excluded.push_back(quorum[i]);
        if (!failure || (failure->retryable() && !e.retryable())) failure = e;
      }
    }
    if (!slots.empty()) {
      // Every member that answered has consumed its slot; the next attempt
      // must start past all of them.
      const SlotId top = *std::max_element(slots.begin(), slots.end());
      const bool aligned = std::all_of(slots.begin(), slots.end(), [&](const SlotId& s) { return s == top; });
      known.floor = std::max(known.floor, top.next());
      state_->put(data_id, known);
      if (!failure && !aligned) {
        failure = Error(ErrorCode::kPoolMisaligned, "servers answered from different precomputation slots");
      }
    }
    if (failure) {
      if (!failure->retryable()) throw *failure;
      last = failure;
      continue;
    }

    const BlockVector bv = qss::reconstruct(responses, params_, byte_length);
    ReconstructResult out;
    out.data = verify_and_decode(bv, guess);
    if (times) times->reconstruct_s += elapsed(start);
    out.quorum = quorum;
    out.slot = slots.front();
    out.attempts = attempt;
    if (known.byte_length != byte_length) {
      known.byte_length = byte_length;
      state_->put(data_id, known);
    }
    return out;
  }
  throw last ? *last : Error(ErrorCode::kInternal, "no reconstruction attempt was made");
}

// --- key statistics ----------------------------------------------------------

KeyStats key_stats(std::span<const AuditRecord> records, const std::map<std::string, std::uint64_t>& sizes) {
  KeyStats s;
  for (const auto& r : records) {
    if (r.event != "deliver") continue;
    const auto colon = r.purpose.find(':');
    if (colon == std::string::npos) continue;
    const std::string phase = r.purpose.substr(0, colon);
    if (phase != "register" && phase != "precompute" && phase != "reconstruct") continue;
    const std::string data_id = r.purpose.substr(colon + 1);
    s.by_phase[phase] += r.octets;
    s.by_data[data_id][phase] += r.octets;
    s.total += r.octets;
  }
  for (const auto& [id, size] : sizes) s.data_bytes += size;
  return s;
}

std::string format_key_stats(const KeyStats& stats) {
  std::ostringstream out;
  for (const char* phase : {"register", "precompute", "reconstruct"}) {
    auto it = stats.by_phase.find(phase);
    out << phase << "_octets=" << (it == stats.by_phase.end() ? 0 : it->second) << '\n';
  }
  out << "total_octets=" << stats.total << '\n';
  out << "data_bytes=" << stats.data_bytes << '\n';
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "ratio=" << stats.ratio() << '\n';
  return out.str();
}

// --- process helpers -----------------------------------------------------------

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAuthenticationFailed: return 2;
    case ErrorCode::kTransport:
    case ErrorCode::kPeerUnreachable:
    case ErrorCode::kKeyExhausted:
    case ErrorCode::kKeyExpired:
    case ErrorCode::kNoRoute:
    case ErrorCode::kPoolExhausted:
    case ErrorCode::kPoolMisaligned:
    case ErrorCode::kRateLimited: return 3;
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kOutOfRange:
    case ErrorCode::kImproperQuorum: return 4;
    default: return 1;
  }
}

std::string obtain_passphrase(const std::string& prompt) {
  if (const char* env = std::getenv("PASS_STORE_PW")) return env;
  if (!::isatty(STDIN_FILENO)) fail(ErrorCode::kInvalidArgument, "no terminal for the passphrase prompt");
  std::cerr << prompt << std::flush;
  termios old{};
  ::tcgetattr(STDIN_FILENO, &old);
  termios quiet = old;
  quiet.c_lflag &= ~static_cast<tcflag_t>(ECHO);
  ::tcsetattr(STDIN_FILENO, TCSANOW, &quiet);
  std::string line;
  std::getline(std::cin, line);
  ::tcsetattr(STDIN_FILENO, TCSANOW, &old);
  std::cerr << '\n';
  return line;
}

}  // namespace qss
