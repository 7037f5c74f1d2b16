#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qss/entropy.hpp"
#include "qss/field.hpp"

namespace qss {

// A share is the evaluation of a sharing polynomial at a public point.
// Points are server indices, 1 <= point <= n < q.
struct Share {
  std::uint32_t point = 0;
  FieldElement value;
};

// Coefficients c_0 .. c_d, low to high. Leading coefficients may be zero,
// so the polynomial has degree at most d.
class SharePolynomial {
 public:
  explicit SharePolynomial(std::vector<FieldElement> coefficients);

  // c_0 = constant, c_1 .. c_degree uniform.
  static SharePolynomial random(const FieldElement& constant, unsigned degree, EntropySource& entropy);
  // Random polynomial with c_0 = 0.
  static SharePolynomial random_zero(const MersennePrime& field, unsigned degree, EntropySource& entropy);

  unsigned degree_bound() const { return static_cast<unsigned>(coefficients_.size() - 1); }
  const std::vector<FieldElement>& coefficients() const { return coefficients_; }
  const MersennePrime& field() const { return coefficients_.front().field(); }

  FieldElement evaluate(const FieldElement& x) const;
  FieldElement evaluate(std::uint32_t x) const;
  std::vector<Share> shares(std::span<const std::uint32_t> points) const;
  // Points 1 .. n.
  std::vector<Share> shares(std::uint32_t n) const;

 private:
  std::vector<FieldElement> coefficients_;
};

std::vector<Share> make_shares(const FieldElement& secret, unsigned degree, std::uint32_t n, EntropySource& entropy);
std::vector<Share> make_zero_shares(const MersennePrime& field, unsigned degree, std::uint32_t n,
                                    EntropySource& entropy);

// Lagrange weights lambda_j with f(0) = sum lambda_j f(x_j). Fails on
// duplicate or zero points before doing any arithmetic.
std::vector<FieldElement> lagrange_weights_at_zero(std::span<const std::uint32_t> points, const MersennePrime& field);

// f(0) of the unique polynomial of degree <= degree through exactly
// degree + 1 shares.
FieldElement interpolate_at_zero(std::span<const Share> shares, unsigned degree);

}  // namespace qss
