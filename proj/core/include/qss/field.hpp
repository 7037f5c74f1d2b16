#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qss/entropy.hpp"

namespace qss {

class FieldElement;

// GF(q) for a Mersenne prime q = 2^m - 1. Instances are interned: get(m)
// always returns the same object, so fields compare by address.
class MersennePrime {
 public:
  static const MersennePrime& get(unsigned exponent);
  static bool is_known(unsigned exponent);
  static std::span<const unsigned> known_exponents();

  MersennePrime(const MersennePrime&) = delete;
  MersennePrime& operator=(const MersennePrime&) = delete;

  unsigned exponent() const { return exponent_; }
  const mpz_class& modulus() const { return modulus_; }
  // Fixed encoding width, ceil(m / 8) octets.
  std::size_t byte_width() const { return (exponent_ + 7) / 8; }

  FieldElement zero() const;
  FieldElement one() const;
  FieldElement from_u64(std::uint64_t v) const;
  // Canonical value; fails with kOutOfRange unless 0 <= v < q.
  FieldElement element(const mpz_class& v) const;
  // Any non-negative integer, folded into range.
  FieldElement reduce(const mpz_class& x) const;
  FieldElement random(EntropySource& entropy) const;
  FieldElement from_bytes(std::span<const std::uint8_t> bytes) const;

  bool operator==(const MersennePrime& other) const { return this == &other; }

 private:
  explicit MersennePrime(unsigned exponent);

  // In-place fold: x <- (x mod 2^m) + (x >> m) until x < 2^m, then maps q to 0.
  void fold(mpz_class& x) const;

  friend class FieldElement;

  unsigned exponent_;
  mpz_class modulus_;
};

class FieldElement {
 public:
  // An unbound placeholder; every arithmetic operation rejects it.
  FieldElement() = default;
  FieldElement(const MersennePrime& field, mpz_class canonical_value);

  const MersennePrime& field() const;
  bool bound() const { return field_ != nullptr; }
  const mpz_class& value() const { return value_; }
  bool is_zero() const { return value_ == 0; }
  std::size_t bit_length() const;
  // Only meaningful when the value fits; used by tests on small fields.
  std::uint64_t to_u64() const;
  std::string to_string() const;

  FieldElement operator+(const FieldElement& rhs) const;
  FieldElement operator-(const FieldElement& rhs) const;
  FieldElement operator*(const FieldElement& rhs) const;
  FieldElement operator-() const;
  FieldElement& operator+=(const FieldElement& rhs);
  FieldElement& operator-=(const FieldElement& rhs);
  FieldElement& operator*=(const FieldElement& rhs);

  FieldElement pow(const mpz_class& exponent) const;
  FieldElement pow(std::uint64_t exponent) const;
  // Multiplicative inverse; fails with kNoInverse on zero.
  FieldElement inv() const;

  std::vector<std::uint8_t> to_bytes() const;
  void write_bytes(std::span<std::uint8_t> out) const;

  bool operator==(const FieldElement& rhs) const;
  bool operator!=(const FieldElement& rhs) const { return !(*this == rhs); }

 private:
  void check_same(const FieldElement& rhs) const;

  const MersennePrime* field_ = nullptr;
  mpz_class value_;
};

// Free-function spellings of the field operations.
FieldElement reduce(const mpz_class& x, const MersennePrime& field);
FieldElement add(const FieldElement& a, const FieldElement& b);
FieldElement mul(const FieldElement& a, const FieldElement& b);
FieldElement inv(const FieldElement& a);
FieldElement element_from_bytes(std::span<const std::uint8_t> bytes, const MersennePrime& field);
std::vector<std::uint8_t> element_to_bytes(const FieldElement& e);
FieldElement random_element(const MersennePrime& field, EntropySource& entropy);

}  // namespace qss
