#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qss/entropy.hpp"
#include "qss/field.hpp"
#include "qss/sharing.hpp"

namespace qss {

// Servers holding the precomputation pool for one attempt, and answering it.
// Sorted, distinct, 1-based server indices.
using Quorum = std::vector<std::uint32_t>;

enum class PoolMode : std::uint8_t {
  // Pools are built by, and consumed for, one specific quorum L.
  kPerQuorum = 0,
  // All n servers build a shared pool; any quorum draws from it.
  kAllServers = 1,
};

struct SchemeParams {
  std::uint32_t n = 0;
  std::uint32_t t = 0;
  const MersennePrime* field = nullptr;

  SchemeParams() = default;
  SchemeParams(std::uint32_t servers, std::uint32_t corruption_bound, const MersennePrime& f);

  // n >= 2t + 1, t >= 1, n < q.
  void validate() const;

  const MersennePrime& prime() const;
  unsigned data_degree() const { return 2 * t; }
  unsigned password_degree() const { return t; }
  std::uint32_t quorum_size() const { return 2 * t + 1; }
  Quorum all_servers() const;
};

// Sorts and checks that indices are distinct and within 1..n. Does not
// check the size; see check_quorum_size.
Quorum normalize_quorum(std::vector<std::uint32_t> members, const SchemeParams& params);
// Rejects |L| != 2t + 1 as an improper request.
void check_quorum_size(const Quorum& quorum, const SchemeParams& params);
bool quorum_contains(const Quorum& quorum, std::uint32_t server);

// Data split into (m - 1)-bit limbs, least significant first, plus the
// optional MAC block D_{l+1}.
struct BlockVector {
  std::vector<FieldElement> blocks;
  std::optional<FieldElement> mac_block;
  std::uint64_t byte_length = 0;
};

// l = ceil(8 * bytes / (m - 1)).
std::uint64_t block_count(std::uint64_t byte_length, unsigned exponent);

BlockVector encode_blocks(std::span<const std::uint8_t> data, const MersennePrime& field);
std::vector<std::uint8_t> decode_blocks(const BlockVector& bv);

// sum_{i=1..l} D_i P^i.
FieldElement compute_mac(std::span<const FieldElement> blocks, const FieldElement& password);

// Passphrase octets read as a little-endian integer; must be < 2^(m-1).
FieldElement encode_password(std::span<const std::uint8_t> octets, const MersennePrime& field);
FieldElement encode_password(std::string_view passphrase, const MersennePrime& field);
// Crude character-class entropy estimate in bits, for warnings only.
double estimate_password_bits(std::string_view passphrase);

struct RegistrationBundle {
  std::string owner_id;
  std::string data_id;
  std::uint32_t server = 0;
  std::uint64_t byte_length = 0;
  // f_{D_1}(j) .. f_{D_l}(j), f_{D_{l+1}}(j) (the MAC block last).
  std::vector<FieldElement> data_shares;
  FieldElement password_share;

  std::size_t block_count() const { return data_shares.empty() ? 0 : data_shares.size() - 1; }
};

// Appends the MAC, shares every block at degree 2t and the password at
// degree t. Bundle j (0-based) belongs to server j + 1.
std::vector<RegistrationBundle> register_data(std::span<const std::uint8_t> data, const FieldElement& password,
                                              const SchemeParams& params, EntropySource& entropy,
                                              std::string_view owner_id = {}, std::string_view data_id = {});
// Same, from already-encoded blocks and without the password size check.
std::vector<RegistrationBundle> register_blocks(const BlockVector& blocks, const FieldElement& password,
                                                const SchemeParams& params, EntropySource& entropy,
                                                std::string_view owner_id = {}, std::string_view data_id = {});

// One server's precomputation output for one set: a degree-t sharing of a
// fresh R_h and a degree-2t sharing of zero, evaluated at every member.
struct PrecomputedContribution {
  std::uint32_t holder = 0;
  Quorum points;
  std::vector<FieldElement> randomizer_shares;
  std::vector<FieldElement> zero_shares;
};

PrecomputedContribution gen_precomputed_contribution(const SchemeParams& params, const Quorum& points,
                                                     std::uint32_t holder, EntropySource& entropy);

// Server j's material for one block of one attempt: f_{R_h}(j) and
// f_{0_h}(j) for every contributor h in the label.
class PrecomputedSet {
 public:
  PrecomputedSet(Quorum label, std::uint32_t block, std::uint32_t holder, std::vector<FieldElement> randomizer_shares,
                 std::vector<FieldElement> zero_shares);
  PrecomputedSet(PrecomputedSet&& other) noexcept;
  PrecomputedSet& operator=(PrecomputedSet&& other) noexcept;
  PrecomputedSet(const PrecomputedSet&) = delete;
  PrecomputedSet& operator=(const PrecomputedSet&) = delete;

  const Quorum& label() const { return label_; }
  std::uint32_t block() const { return block_; }
  std::uint32_t holder() const { return holder_; }
  const std::vector<FieldElement>& randomizer_shares() const { return randomizer_shares_; }
  const std::vector<FieldElement>& zero_shares() const { return zero_shares_; }

  bool consumed() const { return consumed_.load(); }
  // Exactly one caller ever observes true.
  bool try_consume() { return !consumed_.exchange(true); }

  // R = sum over h in `over` of f_{R_h}(j); Z likewise.
  FieldElement randomizer_sum(const Quorum& over) const;
  FieldElement zero_sum(const Quorum& over) const;

 private:
  std::size_t index_of(std::uint32_t contributor) const;

  Quorum label_;
  std::uint32_t block_ = 0;
  std::uint32_t holder_ = 0;
  std::vector<FieldElement> randomizer_shares_;
  std::vector<FieldElement> zero_shares_;
  std::atomic<bool> consumed_{false};
};

struct ReconstructionRequest {
  Quorum quorum;
  std::uint32_t point = 0;
  FieldElement password_share;
  std::string data_id;
  std::uint64_t attempt_id = 0;
};

struct ReconstructionResponse {
  std::uint32_t point = 0;
  std::vector<FieldElement> values;  // F_{j,1} .. F_{j,l+1}
};

// Degree-t sharing of the guessed password, one request per quorum member.
std::vector<ReconstructionRequest> make_request(const FieldElement& password_guess, const SchemeParams& params,
                                                const Quorum& quorum, EntropySource& entropy,
                                                std::string_view data_id = {}, std::uint64_t attempt_id = 0);

// F_{j,i} = (f_P(j) - f_{P'}(j)) R + Z + f_{D_i}(j). Consumes the set.
// `block` is 1-based, l + 1 addressing the MAC block.
FieldElement respond(const SchemeParams& params, const RegistrationBundle& bundle, PrecomputedSet& set,
                     const ReconstructionRequest& request, std::uint32_t block);

// Interpolates every block at zero from 2t + 1 responders.
BlockVector reconstruct(std::span<const ReconstructionResponse> responses, const SchemeParams& params,
                        std::uint64_t byte_length);

// Recomputes the MAC; on match returns the decoded data, otherwise throws
// kAuthenticationFailed.
std::vector<std::uint8_t> verify_and_decode(const BlockVector& bv, const FieldElement& password);

}  // namespace qss
