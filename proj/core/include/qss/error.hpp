#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qss {

// Wire-visible error codes. Values are part of the ERROR message encoding
// and must not be renumbered.
enum class ErrorCode : std::uint16_t {
  kInternal = 1,
  kInvalidArgument = 2,
  kFieldMismatch = 3,
  kNoInverse = 4,
  kOutOfRange = 5,
  kEntropyExhausted = 6,
  kMalformed = 7,
  kDuplicatePoint = 8,
  kShareCount = 9,
  kAuthenticationFailed = 10,
  kImproperQuorum = 11,
  kSetConsumed = 12,
  kQuorumMismatch = 13,
  kDuplicateId = 14,
  kUnknownData = 15,
  kPoolExhausted = 16,
  kRateLimited = 17,
  kNotMember = 18,
  kPeerUnreachable = 19,
  kTagMismatch = 20,
  kReplay = 21,
  kPadReuse = 22,
  kUnknownKey = 23,
  kKeyExhausted = 24,
  kKeyExpired = 25,
  kKeyConsumed = 26,
  kUnauthorized = 27,
  kNoRoute = 28,
  kUnknownLink = 29,
  kPayloadTooLarge = 30,
  kTransport = 31,
  kPoolMisaligned = 32,
  kConfig = 33,
  kIo = 34,
};

std::string_view to_string(ErrorCode code);

// Retryable errors describe transient infrastructure conditions (key
// material, pools, rate limits, reachability); the same request may succeed
// later without any change on the caller's side.
bool is_retryable(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  bool retryable() const noexcept { return is_retryable(code_); }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& detail);

}  // namespace qss
