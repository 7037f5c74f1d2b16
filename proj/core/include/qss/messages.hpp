#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qss/error.hpp"
#include "qss/scheme.hpp"

namespace qss {

enum class MsgType : std::uint8_t {
  kStoreShares = 0x01,
  kAck = 0x02,
  kDeleteShares = 0x03,
  kPrecompEnsure = 0x10,
  kPrecompBegin = 0x11,
  kPrecompContrib = 0x12,
  kPrecompCommit = 0x13,
  kPrecompAbort = 0x14,
  kReconRequest = 0x20,
  kReconResponse = 0x21,
  kKsaRequest = 0x30,
  kKsaFetch = 0x31,
  kKsaKey = 0x32,
  kError = 0x7F,
};

std::string_view to_string(MsgType type);
bool is_known_message(std::uint8_t type);

// Position of one attempt's worth of sets in a pool, ordered (round, slot).
struct SlotId {
  std::uint64_t round = 0;
  std::uint32_t slot = 0;

  SlotId next() const { return {round, slot + 1}; }
  auto operator<=>(const SlotId&) const = default;
};

struct StoreShares {
  std::uint32_t n = 0;
  std::uint32_t t = 0;
  unsigned m = 0;
  bool overwrite = false;
  RegistrationBundle bundle;
};

struct DeleteShares {
  std::string owner_id;
  std::string data_id;
};

struct Ack {
  std::uint64_t value = 0;
};

struct PrecompEnsure {
  std::string owner_id;
  std::string data_id;
  Quorum pool_key;
  SlotId floor;
};

struct PrecompBegin {
  std::string owner_id;
  std::string data_id;
  Quorum label;
  std::uint64_t round = 0;
  std::uint32_t count = 0;
};

// Contributor h's shares for one recipient: for every slot, for every
// block 1..l+1, f_{R_h}(recipient) and f_{0_h}(recipient).
struct PrecompContrib {
  std::string owner_id;
  std::string data_id;
  Quorum label;
  std::uint64_t round = 0;
  std::uint32_t contributor = 0;
  std::uint32_t count = 0;
  std::uint32_t blocks = 0;
  unsigned m = 0;
  std::vector<FieldElement> randomizer;
  std::vector<FieldElement> zero;
};

struct PrecompDecision {
  std::string owner_id;
  std::string data_id;
  Quorum label;
  std::uint64_t round = 0;
};

struct ReconRequest {
  std::string owner_id;
  std::string data_id;
  std::uint64_t attempt_id = 0;
  SlotId floor;
  Quorum quorum;
  unsigned m = 0;
  FieldElement password_share;
};

struct ReconResponse {
  SlotId slot;
  std::uint32_t point = 0;
  std::uint64_t byte_length = 0;
  unsigned m = 0;
  std::vector<FieldElement> values;
};

struct ErrorMsg {
  ErrorCode code = ErrorCode::kInternal;
  std::string detail;
};

std::vector<std::uint8_t> encode(const StoreShares& msg);
std::vector<std::uint8_t> encode(const DeleteShares& msg);
std::vector<std::uint8_t> encode(const Ack& msg);
std::vector<std::uint8_t> encode(const PrecompEnsure& msg);
std::vector<std::uint8_t> encode(const PrecompBegin& msg);
std::vector<std::uint8_t> encode(const PrecompContrib& msg);
std::vector<std::uint8_t> encode(const PrecompDecision& msg);
std::vector<std::uint8_t> encode(const ReconRequest& msg);
std::vector<std::uint8_t> encode(const ReconResponse& msg);
std::vector<std::uint8_t> encode(const ErrorMsg& msg);

StoreShares decode_store_shares(std::span<const std::uint8_t> body);
DeleteShares decode_delete_shares(std::span<const std::uint8_t> body);
Ack decode_ack(std::span<const std::uint8_t> body);
PrecompEnsure decode_precomp_ensure(std::span<const std::uint8_t> body);
PrecompBegin decode_precomp_begin(std::span<const std::uint8_t> body);
PrecompContrib decode_precomp_contrib(std::span<const std::uint8_t> body);
PrecompDecision decode_precomp_decision(std::span<const std::uint8_t> body);
ReconRequest decode_recon_request(std::span<const std::uint8_t> body);
ReconResponse decode_recon_response(std::span<const std::uint8_t> body);
ErrorMsg decode_error(std::span<const std::uint8_t> body);

// Rethrows the error an ERROR reply carries; any other unexpected reply
// type is kMalformed.
void check_reply(std::uint8_t type, std::span<const std::uint8_t> body, MsgType expected);

// Bit j - 1 of the bitmap marks server j.
std::vector<std::uint8_t> quorum_bitmap(const Quorum& quorum);
Quorum quorum_from_bitmap(std::span<const std::uint8_t> bitmap);

}  // namespace qss
