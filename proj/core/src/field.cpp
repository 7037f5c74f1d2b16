#include "qss/field.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <memory>
#include <mutex>

#include "qss/error.hpp"

namespace qss {

namespace {

// 10041 from the experiment list is not a Mersenne exponent; 9941 is.
constexpr std::array<unsigned, 15> kExponents = {5,    13,   31,    61,    521,   1279,  2203, 3217,
                                                 4253, 9941, 11213, 19937, 23209, 44497, 86243};

}  // namespace

bool MersennePrime::is_known(unsigned exponent) {
  return std::find(kExponents.begin(), kExponents.end(), exponent) != kExponents.end();
}

std::span<const unsigned> MersennePrime::known_exponents() { return kExponents; }

const MersennePrime& MersennePrime::get(unsigned exponent) {
  if (!is_known(exponent)) {
    fail(ErrorCode::kInvalidArgument, "m=" + std::to_string(exponent) + " is not a listed Mersenne exponent");
  }
  static std::mutex mu;
  static std::map<unsigned, std::unique_ptr<MersennePrime>> interned;
  std::lock_guard lock(mu);
  auto& slot = interned[exponent];
  if (!slot) slot.reset(new MersennePrime(exponent));
  return *slot;
}

MersennePrime::MersennePrime(unsigned exponent) : exponent_(exponent) {
  mpz_class one = 1;
  modulus_ = (one << exponent) - 1;
}

void MersennePrime::fold(mpz_class& x) const {
  mpz_class high;
  while (mpz_sizeinbase(x.get_mpz_t(), 2) > exponent_) {
    mpz_tdiv_q_2exp(high.get_mpz_t(), x.get_mpz_t(), exponent_);
    mpz_tdiv_r_2exp(x.get_mpz_t(), x.get_mpz_t(), exponent_);
    x += high;
  }
  if (x == modulus_) x = 0;
}

FieldElement MersennePrime::zero() const { return FieldElement(*this, 0); }
FieldElement MersennePrime::one() const { return FieldElement(*this, 1); }

FieldElement MersennePrime::from_u64(std::uint64_t v) const {
  mpz_class x;
  mpz_import(x.get_mpz_t(), 1, -1, sizeof(v), 0, 0, &v);
  return reduce(x);
}

FieldElement MersennePrime::element(const mpz_class& v) const {
  if (sgn(v) < 0 || v >= modulus_) fail(ErrorCode::kOutOfRange, "value not below the field modulus");
  return FieldElement(*this, v);
}

FieldElement MersennePrime::reduce(const mpz_class& x) const {
  if (sgn(x) < 0) fail(ErrorCode::kInvalidArgument, "reduce expects a non-negative integer");
  mpz_class v = x;
  fold(v);
  return FieldElement(*this, std::move(v));
}

FieldElement MersennePrime::random(EntropySource& entropy) const {
  std::vector<std::uint8_t> buf(byte_width());
  const unsigned spare = static_cast<unsigned>(buf.size() * 8 - exponent_);
  const std::uint8_t top_mask = static_cast<std::uint8_t>(0xFFu >> spare);
  mpz_class v;
  for (;;) {
    entropy.fill(buf);
    buf.back() &= top_mask;
    mpz_import(v.get_mpz_t(), buf.size(), -1, 1, 0, 0, buf.data());
    if (v != modulus_) return FieldElement(*this, std::move(v));
  }
}

FieldElement MersennePrime::from_bytes(std::span<const std::uint8_t> bytes) const {
  if (bytes.size() != byte_width()) {
    fail(ErrorCode::kMalformed, "element encoding must be " + std::to_string(byte_width()) + " octets, got " +
                                    std::to_string(bytes.size()));
  }
  mpz_class v;
  mpz_import(v.get_mpz_t(), bytes.size(), -1, 1, 0, 0, bytes.data());
  return element(v);
}

FieldElement::FieldElement(const MersennePrime& field, mpz_class canonical_value)
    : field_(&field), value_(std::move(canonical_value)) {}

const MersennePrime& FieldElement::field() const {
  if (field_ == nullptr) fail(ErrorCode::kInvalidArgument, "unbound field element");
  return *field_;
}

std::size_t FieldElement::bit_length() const {
  return value_ == 0 ? 0 : mpz_sizeinbase(value_.get_mpz_t(), 2);
}

std::uint64_t FieldElement::to_u64() const {
  std::uint64_t out = 0;
  if (bit_length() > 64) fail(ErrorCode::kOutOfRange, "element does not fit 64 bits");
  mpz_export(&out, nullptr, -1, sizeof(out), 0, 0, value_.get_mpz_t());
  return out;
}

std::string FieldElement::to_string() const { return value_.get_str(); }

void FieldElement::check_same(const FieldElement& rhs) const {
  if (field_ == nullptr || rhs.field_ == nullptr) fail(ErrorCode::kInvalidArgument, "unbound field element");
  if (field_ != rhs.field_) fail(ErrorCode::kFieldMismatch, "operands belong to different fields");
}

FieldElement FieldElement::operator+(const FieldElement& rhs) const {
  FieldElement out = *this;
  out += rhs;
  return out;
}

FieldElement FieldElement::operator-(const FieldElement& rhs) const {
  FieldElement out = *this;
  out -= rhs;
  return out;
}

FieldElement FieldElement::operator*(const FieldElement& rhs) const {
  check_same(rhs);
  mpz_class product = value_ * rhs.value_;
  field_->fold(product);
  return FieldElement(*field_, std::move(product));
}

FieldElement FieldElement::operator-() const {
  const MersennePrime& f = field();
  if (value_ == 0) return *this;
  return FieldElement(f, f.modulus() - value_);
}

FieldElement& FieldElement::operator+=(const FieldElement& rhs) {
  check_same(rhs);
  value_ += rhs.value_;
  if (value_ >= field_->modulus()) value_ -= field_->modulus();
  return *this;
}

FieldElement& FieldElement::operator-=(const FieldElement& rhs) {
  check_same(rhs);
  if (value_ >= rhs.value_) {
    value_ -= rhs.value_;
  } else {
    value_ += field_->modulus();
    value_ -= rhs.value_;
  }
  return *this;
}

FieldElement& FieldElement::operator*=(const FieldElement& rhs) {
  *this = *this * rhs;
  return *this;
}

FieldElement FieldElement::pow(const mpz_class& exponent) const {
  const MersennePrime& f = field();
  if (sgn(exponent) < 0) fail(ErrorCode::kInvalidArgument, "negative exponent");
  FieldElement result = f.one();
  const std::size_t bits = exponent == 0 ? 0 : mpz_sizeinbase(exponent.get_mpz_t(), 2);
  for (std::size_t i = bits; i-- > 0;) {
    result = result * result;
    if (mpz_tstbit(exponent.get_mpz_t(), i)) result = result * *this;
  }
  return result;
}

FieldElement FieldElement::pow(std::uint64_t exponent) const {
  mpz_class e;
  mpz_import(e.get_mpz_t(), 1, -1, sizeof(exponent), 0, 0, &exponent);
  return pow(e);
}

FieldElement FieldElement::inv() const {
  const MersennePrime& f = field();
  if (value_ == 0) fail(ErrorCode::kNoInverse, "zero has no multiplicative inverse");
  // Extended gcd; far cheaper than a^(q-2) once m reaches the thousands.
  mpz_class out;
  mpz_invert(out.get_mpz_t(), value_.get_mpz_t(), f.modulus().get_mpz_t());
  return FieldElement(f, std::move(out));
}

std::vector<std::uint8_t> FieldElement::to_bytes() const {
  std::vector<std::uint8_t> out(field().byte_width());
  write_bytes(out);
  return out;
}

void FieldElement::write_bytes(std::span<std::uint8_t> out) const {
  const std::size_t width = field().byte_width();
  if (out.size() != width) fail(ErrorCode::kInvalidArgument, "output span has the wrong width");
  std::fill(out.begin(), out.end(), 0);
  std::size_t written = 0;
  mpz_export(out.data(), &written, -1, 1, 0, 0, value_.get_mpz_t());
}

bool FieldElement::operator==(const FieldElement& rhs) const {
  return field_ == rhs.field_ && value_ == rhs.value_;
}

FieldElement reduce(const mpz_class& x, const MersennePrime& field) { return field.reduce(x); }
FieldElement add(const FieldElement& a, const FieldElement& b) { return a + b; }
FieldElement mul(const FieldElement& a, const FieldElement& b) { return a * b; }
FieldElement inv(const FieldElement& a) { return a.inv(); }

FieldElement element_from_bytes(std::span<const std::uint8_t> bytes, const MersennePrime& field) {
  return field.from_bytes(bytes);
}

std::vector<std::uint8_t> element_to_bytes(const FieldElement& e) { return e.to_bytes(); }

FieldElement random_element(const MersennePrime& field, EntropySource& entropy) { return field.random(entropy); }

}  // namespace qss
