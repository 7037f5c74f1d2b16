#include <gtest/gtest.h>

#include <random>

#include "qss/entropy.hpp"
#include "qss/error.hpp"
#include "qss/field.hpp"
#include "qss/stats.hpp"

namespace {

using qss::ErrorCode;
using qss::MersennePrime;

const MersennePrime& f31() { return MersennePrime::get(5); }

std::uint64_t v(const qss::FieldElement& e) { return e.to_u64(); }

// Independent oracle: extended Euclid over machine integers.
std::int64_t euclid_inverse(std::int64_t a, std::int64_t q) {
  std::int64_t r0 = q, r1 = a, s0 = 0, s1 = 1;
  while (r1 != 0) {
    const std::int64_t k = r0 / r1;
    std::tie(r0, r1) = std::make_pair(r1, r0 - k * r1);
    std::tie(s0, s1) = std::make_pair(s1, s0 - k * s1);
  }
  return ((s0 % q) + q) % q;
}

template <typename Code>
void expect_code(Code&& fn, ErrorCode code) {
  try {
    fn();
    ADD_FAILURE() << "no exception";
  } catch (const qss::Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(MersennePrime, KnownExponentsOnly) {
  for (unsigned m : {5u, 13u, 31u, 61u, 521u, 1279u, 2203u, 3217u, 4253u, 9941u, 11213u, 19937u, 23209u, 44497u,
                     86243u}) {
    EXPECT_TRUE(MersennePrime::is_known(m)) << m;
  }
  EXPECT_FALSE(MersennePrime::is_known(10041));
  EXPECT_FALSE(MersennePrime::is_known(11));
  EXPECT_THROW(MersennePrime::get(10041), qss::Error);
  const auto& f = MersennePrime::get(521);
  EXPECT_EQ(f.modulus(), (mpz_class(1) << 521) - 1);
  EXPECT_EQ(&f, &MersennePrime::get(521));
}

TEST(FieldReduce, Examples) {
  EXPECT_EQ(v(f31().reduce(35)), 4u);
  EXPECT_EQ(v(f31().reduce(31)), 0u);
  EXPECT_EQ(v(f31().reduce(1022)), 30u);
  // The all-ones pattern is q itself and must come out as zero.
  EXPECT_TRUE(MersennePrime::get(521).reduce(MersennePrime::get(521).modulus()).is_zero());
}

TEST(FieldReduce, AgreesWithDivisionOracle) {
  gmp_randclass rng(gmp_randinit_default);
  rng.seed(7);
  for (unsigned m : {5u, 61u, 521u}) {
    const auto& f = MersennePrime::get(m);
    for (int i = 0; i < 10000; ++i) {
      const mpz_class x = rng.get_z_bits(2 * m);
      const mpz_class expected = x % f.modulus();
      ASSERT_EQ(f.reduce(x).value(), expected) << "m=" << m << " x=" << x.get_str();
    }
  }
}

TEST(FieldArithmetic, Examples) {
  const auto& f = f31();
  EXPECT_EQ(v(f.from_u64(25) + f.from_u64(10)), 4u);
  EXPECT_EQ(v(f.from_u64(30) + f.from_u64(1)), 0u);
  EXPECT_EQ(v(f.zero() + f.from_u64(17)), 17u);
  EXPECT_EQ(v(f.from_u64(6) * f.from_u64(7)), 11u);
  EXPECT_EQ(v(f.one() * f.from_u64(23)), 23u);
  const auto& big = MersennePrime::get(521);
  const auto two520 = big.element(mpz_class(1) << 520);
  EXPECT_EQ(two520 * big.from_u64(2), big.one());
  EXPECT_EQ(qss::add(f.from_u64(25), f.from_u64(10)), f.from_u64(4));
  EXPECT_EQ(qss::mul(f.from_u64(6), f.from_u64(7)), f.from_u64(11));
}

TEST(FieldArithmetic, MixedFieldsRejected) {
  expect_code([] { (void)(f31().one() + MersennePrime::get(13).one()); }, ErrorCode::kFieldMismatch);
  EXPECT_THROW((void)(qss::FieldElement() * f31().one()), qss::Error);
}

TEST(FieldInverse, Examples) {
  EXPECT_EQ(v(f31().from_u64(2).inv()), 16u);
  EXPECT_EQ(v(f31().one().inv()), 1u);
  expect_code([] { (void)f31().zero().inv(); }, ErrorCode::kNoInverse);
}

TEST(FieldInverse, MatchesExtendedEuclidOnGf31) {
  for (std::uint64_t a = 1; a < 31; ++a) {
    EXPECT_EQ(static_cast<std::int64_t>(v(qss::inv(f31().from_u64(a)))), euclid_inverse(static_cast<std::int64_t>(a), 31));
  }
}

TEST(FieldInverse, LargeFieldsSatisfyDefinition) {
  qss::ChaChaEntropy e(11, 0);
  for (unsigned m : {521u, 4253u, 19937u}) {
    const auto& f = MersennePrime::get(m);
    for (int i = 0; i < 5; ++i) {
      const auto a = f.random(e);
      if (a.is_zero()) continue;
      EXPECT_EQ(a * a.inv(), f.one());
    }
  }
}

TEST(FieldAlgebra, RingLawsHold) {
  qss::ChaChaEntropy e(3, 0);
  for (unsigned m : {5u, 521u}) {
    const auto& f = MersennePrime::get(m);
    for (int i = 0; i < 2000; ++i) {
      const auto a = f.random(e), b = f.random(e), c = f.random(e);
      ASSERT_EQ(a + b, b + a);
      ASSERT_EQ(a * b, b * a);
      ASSERT_EQ((a + b) + c, a + (b + c));
      ASSERT_EQ((a * b) * c, a * (b * c));
      ASSERT_EQ(a * (b + c), a * b + a * c);
      ASSERT_EQ(a - a, f.zero());
      ASSERT_EQ(a + (-a), f.zero());
    }
  }
}

TEST(FieldBytes, Examples) {
  EXPECT_EQ(qss::element_to_bytes(f31().from_u64(4)), std::vector<std::uint8_t>{0x04});
  const std::vector<std::uint8_t> q{0x1F};
  expect_code([&] { (void)qss::element_from_bytes(q, f31()); }, ErrorCode::kOutOfRange);
  const std::vector<std::uint8_t> wide{0x01, 0x00};
  EXPECT_THROW((void)qss::element_from_bytes(wide, f31()), qss::Error);
  EXPECT_EQ(MersennePrime::get(521).byte_width(), 66u);
}

TEST(FieldBytes, RoundTrip) {
  for (std::uint64_t a = 0; a < 31; ++a) {
    const auto e = f31().from_u64(a);
    EXPECT_EQ(qss::element_from_bytes(qss::element_to_bytes(e), f31()), e);
  }
  const auto& f = MersennePrime::get(521);
  qss::ChaChaEntropy e(4, 0);
  for (int i = 0; i < 1000; ++i) {
    const auto x = f.random(e);
    const auto bytes = x.to_bytes();
    ASSERT_EQ(bytes.size(), 66u);
    ASSERT_EQ(f.from_bytes(bytes), x);
  }
  // Little-endian: 2^8 + 3 encodes as 03 01 00 ...
  const auto bytes = f.from_u64(259).to_bytes();
  EXPECT_EQ(bytes[0], 3);
  EXPECT_EQ(bytes[1], 1);
}

TEST(FieldRandom, ScriptedDraws) {
  qss::ScriptedEntropy direct({0x05});
  EXPECT_EQ(v(qss::random_element(f31(), direct)), 5u);
  // 11111 is q and gets redrawn.
  qss::ScriptedEntropy rejected({0x1F, 0x03});
  EXPECT_EQ(v(f31().random(rejected)), 3u);
  EXPECT_EQ(rejected.remaining(), 0u);
  qss::ScriptedEntropy empty;
  expect_code([&] { (void)f31().random(empty); }, ErrorCode::kEntropyExhausted);
}

TEST(FieldRandom, UniformOverGf31) {
  qss::ChaChaEntropy e(1, 0);
  std::vector<std::uint64_t> counts(31);
  for (int i = 0; i < 100000; ++i) ++counts[v(f31().random(e))];
  EXPECT_LT(qss::chi_square_uniform(counts), qss::chi_square_critical(30, 0.01));
}

TEST(FieldRandom, SeededStreamsAreReproducible) {
  qss::ChaChaEntropy a(9, 2), b(9, 2), c(9, 3);
  const auto& f = MersennePrime::get(521);
  const auto x = f.random(a);
  EXPECT_EQ(x, f.random(b));
  EXPECT_NE(x, f.random(c));
}

}  // namespace
