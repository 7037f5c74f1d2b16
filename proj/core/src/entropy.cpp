#include "qss/entropy.hpp"

#include <sodium.h>

#include <algorithm>
#include <cstring>

#include "qss/error.hpp"

namespace qss {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) fail(ErrorCode::kInternal, "libsodium initialisation failed");
}

}  // namespace

std::uint64_t EntropySource::next_u64() {
  std::array<std::uint8_t, 8> buf{};
  fill(buf);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[static_cast<std::size_t>(i)];
  return v;
}

SystemEntropy::SystemEntropy() { ensure_sodium(); }

void SystemEntropy::fill(std::span<std::uint8_t> out) {
  if (!out.empty()) randombytes_buf(out.data(), out.size());
}

ChaChaEntropy::Key ChaChaEntropy::derive_key(std::uint64_t seed) {
  ensure_sodium();
  std::array<std::uint8_t, 8> in{};
  for (int i = 0; i < 8; ++i) in[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(seed >> (8 * i));
  Key key{};
  static constexpr char kContext[] = "qss-chacha-seed";
  crypto_generichash(key.data(), key.size(), in.data(), in.size(),
                     reinterpret_cast<const unsigned char*>(kContext), sizeof(kContext) - 1);
  return key;
}

ChaChaEntropy::Key ChaChaEntropy::derive_key(std::span<const std::uint8_t> material) {
  ensure_sodium();
  Key key{};
  static constexpr char kContext[] = "qss-chacha-derive";
  crypto_generichash(key.data(), key.size(), material.data(), material.size(),
                     reinterpret_cast<const unsigned char*>(kContext), sizeof(kContext) - 1);
  return key;
}

ChaChaEntropy::ChaChaEntropy(const Key& key, std::uint64_t stream) : key_(key) {
  ensure_sodium();
  for (int i = 0; i < 8; ++i) nonce_[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(stream >> (8 * i));
}

ChaChaEntropy::ChaChaEntropy(std::uint64_t seed, std::uint64_t stream)
    : ChaChaEntropy(derive_key(seed), stream) {}

void ChaChaEntropy::refill() {
  static const std::array<std::uint8_t, 64> kZero{};
  crypto_stream_chacha20_xor_ic(block_.data(), kZero.data(), kZero.size(), nonce_.data(),
                                block_counter_++, key_.data());
  block_pos_ = 0;
}

void ChaChaEntropy::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (block_pos_ == block_.size()) {
      // Bulk path for whole blocks.
      const std::size_t whole = (out.size() - done) / 64;
      if (whole > 0) {
        std::memset(out.data() + done, 0, whole * 64);
        crypto_stream_chacha20_xor_ic(out.data() + done, out.data() + done, whole * 64,
                                      nonce_.data(), block_counter_, key_.data());
        block_counter_ += whole;
        done += whole * 64;
        continue;
      }
      refill();
    }
    const std::size_t take = std::min(out.size() - done, block_.size() - block_pos_);
    std::memcpy(out.data() + done, block_.data() + block_pos_, take);
    block_pos_ += take;
    done += take;
  }
  position_ += out.size();
}

ScriptedEntropy::ScriptedEntropy(std::vector<std::uint8_t> octets)
    : script_(octets.begin(), octets.end()) {}

void ScriptedEntropy::push(std::span<const std::uint8_t> octets) {
  script_.insert(script_.end(), octets.begin(), octets.end());
}

void ScriptedEntropy::fill(std::span<std::uint8_t> out) {
  if (out.size() > script_.size()) fail(ErrorCode::kEntropyExhausted, "scripted entropy ran out");
  for (auto& b : out) {
    b = script_.front();
    script_.pop_front();
  }
}

}  // namespace qss
