#include "qss/sharing.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <utility>

#include "qss/error.hpp"

namespace qss {

namespace {

void check_point_count(std::uint32_t n, const MersennePrime& field) {
  if (n == 0) fail(ErrorCode::kInvalidArgument, "share count must be positive");
  if (mpz_class(n) >= field.modulus()) {
    fail(ErrorCode::kInvalidArgument, "share count " + std::to_string(n) + " must be below the field modulus");
  }
}

std::vector<std::uint32_t> iota_points(std::uint32_t n) {
  std::vector<std::uint32_t> points(n);
  for (std::uint32_t i = 0; i < n; ++i) points[i] = i + 1;
  return points;
}

}  // namespace

SharePolynomial::SharePolynomial(std::vector<FieldElement> coefficients) : coefficients_(std::move(coefficients)) {
  if (coefficients_.empty()) fail(ErrorCode::kInvalidArgument, "polynomial needs at least one coefficient");
  const MersennePrime& f = coefficients_.front().field();
  for (const auto& c : coefficients_) {
    if (c.field() != f) fail(ErrorCode::kFieldMismatch, "coefficients from different fields");
  }
}

SharePolynomial SharePolynomial::random(const FieldElement& constant, unsigned degree, EntropySource& entropy) {
  const MersennePrime& f = constant.field();
  std::vector<FieldElement> coefficients;
  coefficients.reserve(degree + 1);
  coefficients.push_back(constant);
  for (unsigned i = 0; i < degree; ++i) coefficients.push_back(f.random(entropy));
  return SharePolynomial(std::move(coefficients));
}

SharePolynomial SharePolynomial::random_zero(const MersennePrime& field, unsigned degree, EntropySource& entropy) {
  return random(field.zero(), degree, entropy);
}

FieldElement SharePolynomial::evaluate(const FieldElement& x) const {
  FieldElement acc = coefficients_.back();
  for (std::size_t i = coefficients_.size() - 1; i-- > 0;) {
    acc = acc * x;
    acc += coefficients_[i];
  }
  return acc;
}

FieldElement SharePolynomial::evaluate(std::uint32_t x) const { return evaluate(field().from_u64(x)); }

std::vector<Share> SharePolynomial::shares(std::span<const std::uint32_t> points) const {
  std::vector<Share> out;
  out.reserve(points.size());
  for (std::uint32_t p : points) out.push_back(Share{p, evaluate(p)});
  return out;
}

std::vector<Share> SharePolynomial::shares(std::uint32_t n) const {
  check_point_count(n, field());
  const auto points = iota_points(n);
  return shares(points);
}

std::vector<Share> make_shares(const FieldElement& secret, unsigned degree, std::uint32_t n, EntropySource& entropy) {
  check_point_count(n, secret.field());
  return SharePolynomial::random(secret, degree, entropy).shares(n);
}

std::vector<Share> make_zero_shares(const MersennePrime& field, unsigned degree, std::uint32_t n,
                                    EntropySource& entropy) {
  check_point_count(n, field);
  return SharePolynomial::random_zero(field, degree, entropy).shares(n);
}

std::vector<FieldElement> lagrange_weights_at_zero(std::span<const std::uint32_t> points, const MersennePrime& field) {
  if (points.empty()) fail(ErrorCode::kShareCount, "no interpolation points");
  std::set<std::uint32_t> seen;
  for (std::uint32_t p : points) {
    if (p == 0) fail(ErrorCode::kInvalidArgument, "evaluation point 0 is reserved for the secret");
    if (!seen.insert(p).second) fail(ErrorCode::kDuplicatePoint, "point " + std::to_string(p) + " repeated");
  }

  using CacheKey = std::pair<const MersennePrime*, std::vector<std::uint32_t>>;
  static std::mutex cache_mu;
  static std::map<CacheKey, std::vector<FieldElement>> cache;
  CacheKey key{&field, std::vector<std::uint32_t>(points.begin(), points.end())};
  {
    std::lock_guard lock(cache_mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  // lambda_j = prod_{k != j} x_k / (x_k - x_j). All denominators are
  // inverted with a single field inversion.
  const std::size_t count = points.size();
  std::vector<FieldElement> numerators(count, field.one());
  std::vector<FieldElement> denominators(count, field.one());
  for (std::size_t j = 0; j < count; ++j) {
    const FieldElement xj = field.from_u64(points[j]);
    for (std::size_t k = 0; k < count; ++k) {
      if (k == j) continue;
      const FieldElement xk = field.from_u64(points[k]);
      numerators[j] *= xk;
      denominators[j] *= xk - xj;
    }
  }
  std::vector<FieldElement> prefix(count + 1, field.one());
  for (std::size_t j = 0; j < count; ++j) prefix[j + 1] = prefix[j] * denominators[j];
  FieldElement inverse_all = prefix[count].inv();
  std::vector<FieldElement> weights(count);
  for (std::size_t j = count; j-- > 0;) {
    const FieldElement inverse_j = inverse_all * prefix[j];
    inverse_all *= denominators[j];
    weights[j] = numerators[j] * inverse_j;
  }

  std::lock_guard lock(cache_mu);
  if (cache.size() > 4096) cache.clear();
  cache.emplace(std::move(key), weights);
  return weights;
}

FieldElement interpolate_at_zero(std::span<const Share> shares, unsigned degree) {
  if (shares.size() != static_cast<std::size_t>(degree) + 1) {
    fail(ErrorCode::kShareCount,
         "need exactly " + std::to_string(degree + 1) + " shares, got " + std::to_string(shares.size()));
  }
  const MersennePrime& f = shares.front().value.field();
  std::vector<std::uint32_t> points;
  points.reserve(shares.size());
  for (const auto& s : shares) points.push_back(s.point);
  const auto weights = lagrange_weights_at_zero(points, f);
  FieldElement acc = f.zero();
  for (std::size_t j = 0; j < shares.size(); ++j) acc += weights[j] * shares[j].value;
  return acc;
}

}  // namespace qss
