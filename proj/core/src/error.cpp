#include "qss/error.hpp"

namespace qss {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInternal: return "internal";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kFieldMismatch: return "field mismatch";
    case ErrorCode::kNoInverse: return "no inverse";
    case ErrorCode::kOutOfRange: return "out of range";
    case ErrorCode::kEntropyExhausted: return "entropy exhausted";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kDuplicatePoint: return "duplicate point";
    case ErrorCode::kShareCount: return "wrong share count";
    case ErrorCode::kAuthenticationFailed: return "authentication failed";
    case ErrorCode::kImproperQuorum: return "improper quorum";
    case ErrorCode::kSetConsumed: return "precomputed set already consumed";
    case ErrorCode::kQuorumMismatch: return "quorum mismatch";
    case ErrorCode::kDuplicateId: return "duplicate id";
    case ErrorCode::kUnknownData: return "unknown data id";
    case ErrorCode::kPoolExhausted: return "pool exhausted";
    case ErrorCode::kRateLimited: return "rate limited";
    case ErrorCode::kNotMember: return "server not in quorum";
    case ErrorCode::kPeerUnreachable: return "peer unreachable";
    case ErrorCode::kTagMismatch: return "tag mismatch";
    case ErrorCode::kReplay: return "replay";
    case ErrorCode::kPadReuse: return "pad reuse";
    case ErrorCode::kUnknownKey: return "unknown key";
    case ErrorCode::kKeyExhausted: return "insufficient key material";
    case ErrorCode::kKeyExpired: return "key expired";
    case ErrorCode::kKeyConsumed: return "key consumed";
    case ErrorCode::kUnauthorized: return "unauthorized";
    case ErrorCode::kNoRoute: return "no route";
    case ErrorCode::kUnknownLink: return "unknown link";
    case ErrorCode::kPayloadTooLarge: return "payload too large";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kPoolMisaligned: return "precomputation pools misaligned";
    case ErrorCode::kConfig: return "configuration";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

bool is_retryable(ErrorCode code) {
  switch (code) {
    case ErrorCode::kKeyExhausted:
    case ErrorCode::kPoolExhausted:
    case ErrorCode::kRateLimited:
    case ErrorCode::kPeerUnreachable:
    case ErrorCode::kTransport:
    case ErrorCode::kPoolMisaligned:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
      code_(code),
      detail_(detail) {}

void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace qss
