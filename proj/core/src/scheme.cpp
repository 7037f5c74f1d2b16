#include "qss/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "qss/error.hpp"

namespace qss {

SchemeParams::SchemeParams(std::uint32_t servers, std::uint32_t corruption_bound, const MersennePrime& f)
    : n(servers), t(corruption_bound), field(&f) {
  validate();
}

void SchemeParams::validate() const {
  if (field == nullptr) fail(ErrorCode::kInvalidArgument, "scheme parameters need a field");
  if (t < 1) fail(ErrorCode::kInvalidArgument, "t must be at least 1");
  if (n < 2 * t + 1) {
    fail(ErrorCode::kInvalidArgument,
         "n=" + std::to_string(n) + " violates n >= 2t + 1 for t=" + std::to_string(t));
  }
  if (mpz_class(n) >= field->modulus()) fail(ErrorCode::kInvalidArgument, "n must be below the field modulus");
}

const MersennePrime& SchemeParams::prime() const {
  if (field == nullptr) fail(ErrorCode::kInvalidArgument, "scheme parameters need a field");
  return *field;
}

Quorum SchemeParams::all_servers() const {
  Quorum q(n);
  for (std::uint32_t i = 0; i < n; ++i) q[i] = i + 1;
  return q;
}

Quorum normalize_quorum(std::vector<std::uint32_t> members, const SchemeParams& params) {
  std::sort(members.begin(), members.end());
  if (std::adjacent_find(members.begin(), members.end()) != members.end()) {
    fail(ErrorCode::kImproperQuorum, "quorum lists a server twice");
  }
  for (std::uint32_t m : members) {
    if (m < 1 || m > params.n) fail(ErrorCode::kImproperQuorum, "server " + std::to_string(m) + " does not exist");
  }
  return members;
}

void check_quorum_size(const Quorum& quorum, const SchemeParams& params) {
  if (quorum.size() != params.quorum_size()) {
    fail(ErrorCode::kImproperQuorum, "|L|=" + std::to_string(quorum.size()) + ", expected " +
                                         std::to_string(params.quorum_size()));
  }
}

bool quorum_contains(const Quorum& quorum, std::uint32_t server) {
  return std::binary_search(quorum.begin(), quorum.end(), server);
}

std::uint64_t block_count(std::uint64_t byte_length, unsigned exponent) {
  if (exponent < 2) fail(ErrorCode::kInvalidArgument, "exponent too small");
  const std::uint64_t bits = 8 * byte_length;
  const std::uint64_t width = exponent - 1;
  return (bits + width - 1) / width;
}

BlockVector encode_blocks(std::span<const std::uint8_t> data, const MersennePrime& field) {
  if (data.empty()) fail(ErrorCode::kInvalidArgument, "cannot encode empty data");
  const std::uint64_t width = field.exponent() - 1;
  const std::uint64_t l = block_count(data.size(), field.exponent());
  BlockVector bv;
  bv.byte_length = data.size();
  bv.blocks.reserve(l);
  mpz_class limb;
  for (std::uint64_t i = 0; i < l; ++i) {
    const std::uint64_t first_bit = i * width;
    const std::uint64_t first_byte = first_bit / 8;
    const std::uint64_t end_byte = std::min<std::uint64_t>(data.size(), (first_bit + width + 7) / 8 + 1);
    mpz_import(limb.get_mpz_t(), end_byte - first_byte, -1, 1, 0, 0, data.data() + first_byte);
    mpz_tdiv_q_2exp(limb.get_mpz_t(), limb.get_mpz_t(), first_bit % 8);
    mpz_tdiv_r_2exp(limb.get_mpz_t(), limb.get_mpz_t(), width);
    bv.blocks.push_back(field.element(limb));
  }
  return bv;
}

std::vector<std::uint8_t> decode_blocks(const BlockVector& bv) {
  if (bv.blocks.empty()) fail(ErrorCode::kMalformed, "no blocks to decode");
  const MersennePrime& field = bv.blocks.front().field();
  const std::uint64_t width = field.exponent() - 1;
  if (bv.blocks.size() != block_count(bv.byte_length, field.exponent())) {
    fail(ErrorCode::kMalformed, "block count does not match the recorded byte length");
  }
  const std::uint64_t total_bits = bv.byte_length * 8;
  std::vector<std::uint8_t> out(bv.byte_length, 0);
  mpz_class limb;
  std::vector<std::uint8_t> scratch;
  for (std::size_t i = 0; i < bv.blocks.size(); ++i) {
    const FieldElement& b = bv.blocks[i];
    if (b.field() != field) fail(ErrorCode::kFieldMismatch, "blocks from different fields");
    if (b.bit_length() > width) fail(ErrorCode::kOutOfRange, "block " + std::to_string(i + 1) + " exceeds m - 1 bits");
    const std::uint64_t first_bit = i * width;
    const std::uint64_t shift = first_bit % 8;
    const std::uint64_t valid_bits = std::min<std::uint64_t>(width, total_bits - first_bit);
    if (b.bit_length() > valid_bits) fail(ErrorCode::kMalformed, "nonzero padding bits in the final block");
    mpz_mul_2exp(limb.get_mpz_t(), b.value().get_mpz_t(), shift);
    scratch.assign((valid_bits + shift + 7) / 8, 0);
    std::size_t written = 0;
    mpz_export(scratch.data(), &written, -1, 1, 0, 0, limb.get_mpz_t());
    const std::uint64_t first_byte = first_bit / 8;
    for (std::size_t k = 0; k < written; ++k) out[first_byte + k] |= scratch[k];
  }
  return out;
}

FieldElement compute_mac(std::span<const FieldElement> blocks, const FieldElement& password) {
  const MersennePrime& f = password.field();
  FieldElement acc = f.zero();
  for (std::size_t i = blocks.size(); i-- > 0;) {
    acc += blocks[i];
    acc *= password;
  }
  return acc;
}

FieldElement encode_password(std::span<const std::uint8_t> octets, const MersennePrime& field) {
  mpz_class v;
  if (!octets.empty()) mpz_import(v.get_mpz_t(), octets.size(), -1, 1, 0, 0, octets.data());
  const std::size_t bits = v == 0 ? 0 : mpz_sizeinbase(v.get_mpz_t(), 2);
  if (bits > field.exponent() - 1) {
    fail(ErrorCode::kOutOfRange, "password exceeds " + std::to_string(field.exponent() - 1) + " bits");
  }
  return field.element(v);
}

FieldElement encode_password(std::string_view passphrase, const MersennePrime& field) {
  return encode_password(
      std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(passphrase.data()), passphrase.size()),
      field);
}

double estimate_password_bits(std::string_view passphrase) {
  bool lower = false, upper = false, digit = false, other = false;
  for (unsigned char c : passphrase) {
    if (c >= 'a' && c <= 'z') lower = true;
    else if (c >= 'A' && c <= 'Z') upper = true;
    else if (c >= '0' && c <= '9') digit = true;
    else other = true;
  }
  const double alphabet = (lower ? 26 : 0) + (upper ? 26 : 0) + (digit ? 10 : 0) + (other ? 33 : 0);
  if (alphabet == 0) return 0.0;
  return static_cast<double>(passphrase.size()) * std::log2(alphabet);
}

std::vector<RegistrationBundle> register_blocks(const BlockVector& blocks, const FieldElement& password,
                                                const SchemeParams& params, EntropySource& entropy,
                                                std::string_view owner_id, std::string_view data_id) {
  params.validate();
  const MersennePrime& f = params.prime();
  if (blocks.blocks.empty()) fail(ErrorCode::kInvalidArgument, "nothing to register");
  if (password.field() != f) fail(ErrorCode::kFieldMismatch, "password from a different field");

  std::vector<RegistrationBundle> bundles(params.n);
  for (std::uint32_t j = 0; j < params.n; ++j) {
    auto& b = bundles[j];
    b.owner_id = owner_id;
    b.data_id = data_id;
    b.server = j + 1;
    b.byte_length = blocks.byte_length;
    b.data_shares.reserve(blocks.blocks.size() + 1);
  }

  const FieldElement mac = compute_mac(blocks.blocks, password);
  auto share_block = [&](const FieldElement& block) {
    const auto shares = make_shares(block, params.data_degree(), params.n, entropy);
    for (std::uint32_t j = 0; j < params.n; ++j) bundles[j].data_shares.push_back(shares[j].value);
  };
  for (const auto& block : blocks.blocks) share_block(block);
  share_block(mac);

  const auto pw = make_shares(password, params.password_degree(), params.n, entropy);
  for (std::uint32_t j = 0; j < params.n; ++j) bundles[j].password_share = pw[j].value;
  return bundles;
}

std::vector<RegistrationBundle> register_data(std::span<const std::uint8_t> data, const FieldElement& password,
                                              const SchemeParams& params, EntropySource& entropy,
                                              std::string_view owner_id, std::string_view data_id) {
  params.validate();
  const MersennePrime& f = params.prime();
  if (password.field() != f) fail(ErrorCode::kFieldMismatch, "password from a different field");
  if (password.bit_length() > f.exponent() - 1) {
    fail(ErrorCode::kOutOfRange, "password exceeds " + std::to_string(f.exponent() - 1) + " bits");
  }
  const BlockVector bv = encode_blocks(data, f);
  return register_blocks(bv, password, params, entropy, owner_id, data_id);
}

PrecomputedContribution gen_precomputed_contribution(const SchemeParams& params, const Quorum& points,
                                                     std::uint32_t holder, EntropySource& entropy) {
  const MersennePrime& f = params.prime();
  if (!quorum_contains(points, holder)) {
    fail(ErrorCode::kNotMember, "server " + std::to_string(holder) + " is not in the precomputation set");
  }
  const FieldElement r = f.random(entropy);
  const SharePolynomial randomizer = SharePolynomial::random(r, params.password_degree(), entropy);
  const SharePolynomial zero = SharePolynomial::random_zero(f, params.data_degree(), entropy);
  PrecomputedContribution c;
  c.holder = holder;
  c.points = points;
  c.randomizer_shares.reserve(points.size());
  c.zero_shares.reserve(points.size());
  for (std::uint32_t p : points) {
    c.randomizer_shares.push_back(randomizer.evaluate(p));
    c.zero_shares.push_back(zero.evaluate(p));
  }
  return c;
}

PrecomputedSet::PrecomputedSet(Quorum label, std::uint32_t block, std::uint32_t holder,
                               std::vector<FieldElement> randomizer_shares, std::vector<FieldElement> zero_shares)
    : label_(std::move(label)),
      block_(block),
      holder_(holder),
      randomizer_shares_(std::move(randomizer_shares)),
      zero_shares_(std::move(zero_shares)) {
  if (randomizer_shares_.size() != label_.size() || zero_shares_.size() != label_.size()) {
    fail(ErrorCode::kMalformed, "precomputed set needs one randomizer and one zero share per contributor");
  }
}

PrecomputedSet::PrecomputedSet(PrecomputedSet&& other) noexcept
    : label_(std::move(other.label_)),
      block_(other.block_),
      holder_(other.holder_),
      randomizer_shares_(std::move(other.randomizer_shares_)),
      zero_shares_(std::move(other.zero_shares_)),
      consumed_(other.consumed_.load()) {}

PrecomputedSet& PrecomputedSet::operator=(PrecomputedSet&& other) noexcept {
  label_ = std::move(other.label_);
  block_ = other.block_;
  holder_ = other.holder_;
  randomizer_shares_ = std::move(other.randomizer_shares_);
  zero_shares_ = std::move(other.zero_shares_);
  consumed_.store(other.consumed_.load());
  return *this;
}

std::size_t PrecomputedSet::index_of(std::uint32_t contributor) const {
  auto it = std::lower_bound(label_.begin(), label_.end(), contributor);
  if (it == label_.end() || *it != contributor) {
    fail(ErrorCode::kQuorumMismatch, "server " + std::to_string(contributor) + " did not contribute to this set");
  }
  return static_cast<std::size_t>(it - label_.begin());
}

FieldElement PrecomputedSet::randomizer_sum(const Quorum& over) const {
  FieldElement acc = randomizer_shares_.front().field().zero();
  for (std::uint32_t h : over) acc += randomizer_shares_[index_of(h)];
  return acc;
}

FieldElement PrecomputedSet::zero_sum(const Quorum& over) const {
  FieldElement acc = zero_shares_.front().field().zero();
  for (std::uint32_t h : over) acc += zero_shares_[index_of(h)];
  return acc;
}

std::vector<ReconstructionRequest> make_request(const FieldElement& password_guess, const SchemeParams& params,
                                                const Quorum& quorum, EntropySource& entropy,
                                                std::string_view data_id, std::uint64_t attempt_id) {
  check_quorum_size(quorum, params);
  const Quorum normalized = normalize_quorum(quorum, params);
  const SharePolynomial poly = SharePolynomial::random(password_guess, params.password_degree(), entropy);
  std::vector<ReconstructionRequest> out;
  out.reserve(normalized.size());
  for (std::uint32_t j : normalized) {
    ReconstructionRequest r;
    r.quorum = normalized;
    r.point = j;
    r.password_share = poly.evaluate(j);
    r.data_id = data_id;
    r.attempt_id = attempt_id;
    out.push_back(std::move(r));
  }
  return out;
}

FieldElement respond(const SchemeParams& params, const RegistrationBundle& bundle, PrecomputedSet& set,
                     const ReconstructionRequest& request, std::uint32_t block) {
  check_quorum_size(request.quorum, params);
  const bool label_matches = set.label() == request.quorum || set.label() == params.all_servers();
  if (!label_matches) fail(ErrorCode::kQuorumMismatch, "precomputed set was built for a different quorum");
  if (set.holder() != bundle.server || request.point != bundle.server) {
    fail(ErrorCode::kNotMember, "set, bundle and request disagree on the server index");
  }
  if (block < 1 || block > bundle.data_shares.size()) fail(ErrorCode::kOutOfRange, "block index out of range");
  if (set.block() != block) fail(ErrorCode::kQuorumMismatch, "precomputed set belongs to another block");
  if (!set.try_consume()) fail(ErrorCode::kSetConsumed, "precomputed set was already used");

  const FieldElement r = set.randomizer_sum(request.quorum);
  const FieldElement z = set.zero_sum(request.quorum);
  return (bundle.password_share - request.password_share) * r + z + bundle.data_shares[block - 1];
}

BlockVector reconstruct(std::span<const ReconstructionResponse> responses, const SchemeParams& params,
                        std::uint64_t byte_length) {
  if (responses.size() != params.quorum_size()) {
    fail(ErrorCode::kShareCount, "need " + std::to_string(params.quorum_size()) + " responses, got " +
                                     std::to_string(responses.size()));
  }
  const MersennePrime& f = params.prime();
  std::vector<std::uint32_t> points;
  points.reserve(responses.size());
  for (const auto& r : responses) points.push_back(r.point);
  const auto weights = lagrange_weights_at_zero(points, f);

  const std::size_t width = responses.front().values.size();
  if (width < 2) fail(ErrorCode::kMalformed, "responses must carry at least one data block and the MAC block");
  for (const auto& r : responses) {
    if (r.values.size() != width) fail(ErrorCode::kMalformed, "responses disagree on the block count");
  }

  BlockVector bv;
  bv.byte_length = byte_length;
  bv.blocks.reserve(width - 1);
  for (std::size_t i = 0; i < width; ++i) {
    FieldElement acc = f.zero();
    for (std::size_t j = 0; j < responses.size(); ++j) acc += weights[j] * responses[j].values[i];
    if (i + 1 == width) {
      bv.mac_block = std::move(acc);
    } else {
      bv.blocks.push_back(std::move(acc));
    }
  }
  return bv;
}

std::vector<std::uint8_t> verify_and_decode(const BlockVector& bv, const FieldElement& password) {
  if (!bv.mac_block) fail(ErrorCode::kMalformed, "block vector has no MAC block");
  if (compute_mac(bv.blocks, password) != *bv.mac_block) {
    fail(ErrorCode::kAuthenticationFailed, "reconstructed MAC does not match");
  }
  // A matching MAC over out-of-range limbs is still a failed reconstruction.
  try {
    return decode_blocks(bv);
  } catch (const Error&) {
    fail(ErrorCode::kAuthenticationFailed, "reconstructed blocks do not decode");
  }
}

}  // namespace qss
