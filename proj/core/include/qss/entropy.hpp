#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <vector>

namespace qss {

// Source of unbiased random octets. Implementations are not required to be
// thread-safe; each caller owns its source.
class EntropySource {
 public:
  virtual ~EntropySource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  std::uint64_t next_u64();
};

// Operating-system randomness.
class SystemEntropy final : public EntropySource {
 public:
  SystemEntropy();
  void fill(std::span<std::uint8_t> out) override;
};

// Deterministic ChaCha20 keystream. Two instances built from the same
// (seed, stream) produce identical output, which is how the simulated
// quantum layer hands both link endpoints the same key pairs.
class ChaChaEntropy final : public EntropySource {
 public:
  using Key = std::array<std::uint8_t, 32>;

  ChaChaEntropy(const Key& key, std::uint64_t stream);
  ChaChaEntropy(std::uint64_t seed, std::uint64_t stream);

  void fill(std::span<std::uint8_t> out) override;

  // Octets produced so far.
  std::uint64_t position() const { return position_; }

  static Key derive_key(std::uint64_t seed);
  // Hashes arbitrary key material (a configured secret plus a label).
  static Key derive_key(std::span<const std::uint8_t> material);

 private:
  void refill();

  Key key_{};
  std::array<std::uint8_t, 8> nonce_{};
  std::uint64_t block_counter_ = 0;
  std::array<std::uint8_t, 64> block_{};
  std::size_t block_pos_ = 64;
  std::uint64_t position_ = 0;
};

// Replays a fixed octet script and then reports exhaustion. Used to pin
// down random choices in tests and hand traces.
class ScriptedEntropy final : public EntropySource {
 public:
  ScriptedEntropy() = default;
  explicit ScriptedEntropy(std::vector<std::uint8_t> octets);

  void push(std::span<const std::uint8_t> octets);
  void fill(std::span<std::uint8_t> out) override;
  std::size_t remaining() const { return script_.size(); }

 private:
  std::deque<std::uint8_t> script_;
};

}  // namespace qss
