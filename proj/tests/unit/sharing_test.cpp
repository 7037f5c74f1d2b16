#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "qss/entropy.hpp"
#include "qss/error.hpp"
#include "qss/sharing.hpp"
#include "qss/stats.hpp"

namespace {

using qss::MersennePrime;
using qss::Share;

const MersennePrime& f31() { return MersennePrime::get(5); }
qss::FieldElement e31(std::uint64_t x) { return f31().from_u64(x); }

std::vector<std::uint64_t> values(const std::vector<Share>& shares) {
  std::vector<std::uint64_t> out;
  for (const auto& s : shares) out.push_back(s.value.to_u64());
  return out;
}

// Independent oracle: plain power-sum evaluation mod 31.
std::uint64_t eval31(const std::vector<std::uint64_t>& coeffs, std::uint64_t x) {
  std::uint64_t acc = 0, power = 1;
  for (auto c : coeffs) {
    acc = (acc + c * power) % 31;
    power = power * x % 31;
  }
  return acc;
}

TEST(MakeShares, FixedCoefficients) {
  qss::ScriptedEntropy e({3, 2});
  const auto shares = qss::make_shares(e31(5), 2, 3, e);
  EXPECT_EQ(values(shares), (std::vector<std::uint64_t>{10, 19, 1}));
  EXPECT_EQ(shares[0].point, 1u);
  EXPECT_EQ(shares[2].point, 3u);
}

TEST(MakeShares, ConstantPolynomials) {
  qss::ChaChaEntropy e(1, 0);
  for (const auto& s : qss::make_shares(e31(9), 0, 5, e)) EXPECT_EQ(s.value, e31(9));
  qss::ScriptedEntropy zeros({0, 0, 0});
  for (const auto& s : qss::make_shares(e31(9), 3, 4, zeros)) EXPECT_EQ(s.value, e31(9));
}

TEST(MakeShares, TooManyServersForField) {
  qss::ChaChaEntropy e(1, 0);
  EXPECT_THROW((void)qss::make_shares(e31(1), 1, 31, e), qss::Error);
  EXPECT_NO_THROW((void)qss::make_shares(e31(1), 1, 30, e));
}

TEST(ZeroShares, FixedCoefficients) {
  qss::ScriptedEntropy e({1, 1});
  const auto shares = qss::make_zero_shares(f31(), 2, 3, e);
  EXPECT_EQ(values(shares), (std::vector<std::uint64_t>{2, 6, 12}));
  EXPECT_TRUE(qss::interpolate_at_zero(shares, 2).is_zero());
}

TEST(ZeroShares, AlwaysInterpolateToZero) {
  qss::ChaChaEntropy e(2, 0);
  for (int i = 0; i < 200; ++i) {
    const auto poly = qss::SharePolynomial::random_zero(f31(), 2, e);
    EXPECT_TRUE(poly.evaluate(0).is_zero());
    const auto shares = poly.shares(5);
    std::vector<Share> subset{shares[4], shares[1], shares[2]};
    EXPECT_TRUE(qss::interpolate_at_zero(subset, 2).is_zero());
  }
}

TEST(Interpolate, Examples) {
  EXPECT_EQ(qss::interpolate_at_zero(std::vector<Share>{{1, e31(10)}, {2, e31(19)}, {3, e31(1)}}, 2), e31(5));
  EXPECT_EQ(qss::interpolate_at_zero(std::vector<Share>{{1, e31(8)}, {2, e31(11)}}, 1), e31(5));
  EXPECT_EQ(qss::interpolate_at_zero(std::vector<Share>{{1, e31(7)}, {2, e31(7)}, {3, e31(7)}}, 2), e31(7));
}

TEST(Interpolate, LagrangeWeightsMatchHandValues) {
  const std::vector<std::uint32_t> points{1, 2, 3};
  const auto w = qss::lagrange_weights_at_zero(points, f31());
  EXPECT_EQ(w[0], e31(3));
  EXPECT_EQ(w[1], -e31(3));
  EXPECT_EQ(w[2], e31(1));
}

TEST(Interpolate, Errors) {
  EXPECT_THROW((void)qss::interpolate_at_zero(std::vector<Share>{{1, e31(1)}, {1, e31(2)}}, 1), qss::Error);
  EXPECT_THROW((void)qss::interpolate_at_zero(std::vector<Share>{{1, e31(1)}, {2, e31(2)}}, 2), qss::Error);
  try {
    (void)qss::interpolate_at_zero(std::vector<Share>{{2, e31(1)}, {2, e31(2)}}, 1);
  } catch (const qss::Error& err) {
    EXPECT_EQ(err.code(), qss::ErrorCode::kDuplicatePoint);
  }
}

TEST(Polynomial, EvaluationMatchesOracle) {
  qss::ChaChaEntropy e(5, 0);
  for (int i = 0; i < 100; ++i) {
    const auto poly = qss::SharePolynomial::random(f31().random(e), 4, e);
    std::vector<std::uint64_t> coeffs;
    for (const auto& c : poly.coefficients()) coeffs.push_back(c.to_u64());
    for (std::uint64_t x = 0; x < 31; ++x) ASSERT_EQ(poly.evaluate(static_cast<std::uint32_t>(x)).to_u64(), eval31(coeffs, x));
  }
}

// Every (degree + 1)-subset of every sharing reconstructs the secret.
TEST(SharingProperty, RoundTripExhaustiveGf31) {
  qss::ChaChaEntropy e(6, 0);
  for (unsigned degree = 0; degree <= 4; ++degree) {
    for (std::uint32_t n = degree + 1; n <= 7; ++n) {
      for (std::uint64_t secret = 0; secret < 31; ++secret) {
        const auto shares = qss::make_shares(e31(secret), degree, n, e);
        std::vector<bool> pick(n, false);
        std::fill(pick.begin(), pick.begin() + degree + 1, true);
        do {
          std::vector<Share> subset;
          for (std::uint32_t i = 0; i < n; ++i) {
            if (pick[i]) subset.push_back(shares[i]);
          }
          ASSERT_EQ(qss::interpolate_at_zero(subset, degree), e31(secret));
        } while (std::prev_permutation(pick.begin(), pick.end()));
      }
    }
  }
}

// t shares of a degree-t sharing are jointly uniform whatever the secret.
TEST(SharingProperty, TSharesAreUniform) {
  qss::ChaChaEntropy e(7, 0);
  for (std::uint64_t secret : {0u, 17u}) {
    std::vector<std::uint64_t> joint(31 * 31);
    for (int i = 0; i < 100000; ++i) {
      const auto shares = qss::make_shares(e31(secret), 2, 4, e);
      ++joint[shares[0].value.to_u64() * 31 + shares[3].value.to_u64()];
    }
    EXPECT_LT(qss::chi_square_uniform(joint), qss::chi_square_critical(31 * 31 - 1, 0.01)) << "secret " << secret;
  }
}

TEST(SharingProperty, SharesAreLinear) {
  qss::ChaChaEntropy e(8, 0);
  const auto& f = MersennePrime::get(521);
  for (int i = 0; i < 50; ++i) {
    const auto s1 = f.random(e), s2 = f.random(e);
    const auto a = qss::make_shares(s1, 2, 5, e);
    const auto b = qss::make_shares(s2, 2, 5, e);
    std::vector<Share> sum;
    for (std::size_t j = 1; j < 4; ++j) sum.push_back({a[j].point, a[j].value + b[j].value});
    EXPECT_EQ(qss::interpolate_at_zero(sum, 2), s1 + s2);
  }
}

}  // namespace
