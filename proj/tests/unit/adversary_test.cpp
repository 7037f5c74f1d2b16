#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "qss/adversary.hpp"
#include "qss/entropy.hpp"

namespace {

using qss::FieldElement;
using qss::MersennePrime;

// Leibniz expansion over the integers, reduced mod q at the end. Only for
// small matrices; independent of the elimination used by the library.
std::int64_t leibniz_det_mod(const std::vector<std::vector<std::int64_t>>& m, std::int64_t q) {
  const std::size_t n = m.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::int64_t total = 0;
  do {
    std::size_t inversions = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) inversions += perm[i] > perm[j] ? 1 : 0;
    }
    std::int64_t term = 1;
    for (std::size_t i = 0; i < n; ++i) term = (term * m[i][perm[i]]) % q;
    total = (total + (inversions % 2 == 0 ? term : q - term)) % q;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return (total % q + q) % q;
}

std::vector<std::vector<std::int64_t>> as_integers(const qss::DetMInput& in) {
  std::vector<std::vector<std::int64_t>> out;
  for (const auto& row : in.rows) {
    std::vector<std::int64_t> r;
    for (const auto& e : row) r.push_back(static_cast<std::int64_t>(e.to_u64()));
    out.push_back(r);
  }
  return out;
}

TEST(Determinant, HandInstanceOverGf31) {
  const auto& f = MersennePrime::get(5);
  const qss::DetScenario s{&f, 1, {3}, {1, 2}, {f.one(), f.one()}};
  const auto m = qss::assemble_det_m(s);
  // Rows: (1 c | 0 0), (D h | h h^2) for h = 1, 2, (0 0 | c c^2).
  const std::vector<std::vector<std::int64_t>> expected{{1, 3, 0, 0}, {1, 1, 1, 1}, {1, 2, 2, 4}, {0, 0, 3, 9}};
  EXPECT_EQ(as_integers(m), expected);
  EXPECT_EQ(leibniz_det_mod(expected, 31), 25);
  EXPECT_EQ(qss::det_m_bruteforce(m).to_u64(), 25u);
  EXPECT_EQ(qss::det_m_closed_form(s).to_u64(), 25u);
}

TEST(Determinant, ClosedFormMatchesTwoIndependentEvaluations) {
  qss::ChaChaEntropy e(21, 0);
  for (unsigned exponent : {5u, 13u, 31u}) {
    const auto& f = MersennePrime::get(exponent);
    for (int i = 0; i < 60; ++i) {
      const unsigned t = 1 + i % 2;
      const std::uint32_t n = 3 * t + 1 + static_cast<std::uint32_t>(i % 3);
      const auto s = qss::random_det_scenario(f, t, n, e);
      const auto m = qss::assemble_det_m(s);
      const auto brute = qss::det_m_bruteforce(m);
      EXPECT_EQ(brute, qss::det_m_closed_form(s));
      EXPECT_EQ(static_cast<std::int64_t>(brute.to_u64()),
                leibniz_det_mod(as_integers(m), static_cast<std::int64_t>(f.modulus().get_ui())));
    }
  }
}

TEST(Determinant, LargerThresholdsAgree) {
  qss::ChaChaEntropy e(22, 0);
  const auto& f = MersennePrime::get(61);
  for (unsigned t = 3; t <= 6; ++t) {
    const auto s = qss::random_det_scenario(f, t, 3 * t + 2, e);
    EXPECT_EQ(qss::det_m_bruteforce(qss::assemble_det_m(s)), qss::det_m_closed_form(s)) << "t=" << t;
  }
}

TEST(Determinant, VanishesExactlyOnCorrectGuess) {
  qss::ChaChaEntropy e(23, 0);
  const auto& f = MersennePrime::get(61);
  const qss::SchemeParams params(5, 2, f);
  for (int i = 0; i < 20; ++i) {
    const bool wrong = i % 2 == 0;
    const auto scenario = qss::random_scenario(params, e, wrong);
    EXPECT_EQ(scenario.degenerate(), !wrong);
    const auto det = qss::det_m_bruteforce(qss::assemble_det_m(qss::det_scenario(scenario)));
    EXPECT_EQ(det.is_zero(), !wrong);
  }
}

TEST(Simulation, HonestRunRecoversBlocksAndMac) {
  qss::ChaChaEntropy e(24, 0);
  const auto& f = MersennePrime::get(61);
  qss::SimulationInput in;
  in.params = qss::SchemeParams(5, 2, f);
  for (int i = 0; i < 4; ++i) in.blocks.push_back(qss::random_element(f, e));
  in.password = qss::random_element(f, e);
  in.guess = in.password;
  const auto bv = qss::simulate_reconstruction(in, e);
  ASSERT_EQ(bv.blocks.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(bv.blocks[i], in.blocks[i]);
  ASSERT_TRUE(bv.mac_block.has_value());
  EXPECT_EQ(*bv.mac_block, qss::compute_mac(in.blocks, in.password));
}

TEST(Simulation, WrongGuessScramblesEveryBlock) {
  qss::ChaChaEntropy e(25, 0);
  const auto& f = MersennePrime::get(61);
  qss::SimulationInput in;
  in.params = qss::SchemeParams(4, 1, f);
  for (int i = 0; i < 3; ++i) in.blocks.push_back(qss::random_element(f, e));
  in.password = f.from_u64(1234);
  in.guess = f.from_u64(1235);
  const auto bv = qss::simulate_reconstruction(in, e);
  for (int i = 0; i < 3; ++i) EXPECT_NE(bv.blocks[i], in.blocks[i]);
  EXPECT_NE(*bv.mac_block, qss::compute_mac(bv.blocks, in.password));
}

TEST(Forgery, HonestMembersAreAlwaysAccepted) {
  qss::ChaChaEntropy e(26, 0);
  const qss::SchemeParams params(4, 1, MersennePrime::get(5));
  for (int i = 0; i < 500; ++i) {
    const auto out = qss::forgery_outcome(params, 3, {}, e);
    EXPECT_FALSE(out.altered);
    EXPECT_TRUE(out.accepted);
  }
}

// A corrupted member adding fixed offsets gets an altered result past the
// MAC with probability at most l / q.
TEST(Forgery, AcceptanceStaysUnderTheBound) {
  qss::ChaChaEntropy e(27, 0);
  const auto& f = MersennePrime::get(5);
  const qss::SchemeParams params(4, 1, f);
  qss::ForgeryAttack attack;
  attack.response_offsets = {f.from_u64(1), f.from_u64(0), f.from_u64(7), f.from_u64(2)};
  constexpr int kTrials = 20'000;
  int forged = 0;
  for (int i = 0; i < kTrials; ++i) {
    const auto out = qss::forgery_outcome(params, 3, attack, e);
    EXPECT_TRUE(out.altered);
    forged += out.accepted ? 1 : 0;
  }
  const double bound = 3.0 / 31.0;
  const double sigma = std::sqrt(bound * (1 - bound) / kTrials);
  EXPECT_LE(static_cast<double>(forged) / kTrials, bound + 4 * sigma);
}

TEST(Forgery, ZeroShareTamperingIsCaughtToo) {
  qss::ChaChaEntropy e(28, 0);
  const auto& f = MersennePrime::get(5);
  const qss::SchemeParams params(4, 1, f);
  qss::ForgeryAttack attack;
  // Server 1 of {1, 2, 3} has Lagrange weight 3, so shifting the zero shares
  // it hands out by d moves every block by -2d.
  attack.corrupted = 1;
  attack.zero_offsets = {f.from_u64(3), f.from_u64(3), f.from_u64(3), f.from_u64(3)};
  constexpr int kTrials = 10'000;
  int forged = 0;
  for (int i = 0; i < kTrials; ++i) {
    const auto out = qss::forgery_outcome(params, 3, attack, e);
    ASSERT_TRUE(out.altered);
    forged += out.accepted ? 1 : 0;
  }
  const double bound = 3.0 / 31.0;
  EXPECT_LE(static_cast<double>(forged) / kTrials, bound + 4 * std::sqrt(bound * (1 - bound) / kTrials));
}

TEST(Leakage, CorruptedViewLooksUniform) {
  qss::ChaChaEntropy e(29, 0);
  const qss::SchemeParams params(3, 1, MersennePrime::get(5));
  const auto scenario = qss::random_scenario(params, e, true);
  ASSERT_FALSE(scenario.degenerate());
  const auto report = qss::leakage_view_test(scenario, 30'000, e);
  EXPECT_EQ(report.statistics.size(), 3u * params.t + 1);
  EXPECT_EQ(report.dof, 30);
  EXPECT_TRUE(report.uniform());
}

TEST(Leakage, CorrectGuessRevealsTheData) {
  qss::ChaChaEntropy e(30, 0);
  const qss::SchemeParams params(3, 1, MersennePrime::get(5));
  const auto scenario = qss::random_scenario(params, e, false, false);
  ASSERT_TRUE(scenario.degenerate());
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(qss::attack_view(scenario, e).reconstructed, scenario.data_poly.coefficients().front());
  }
}

TEST(Leakage, RegistrationSharesOfTServersAreUniform) {
  qss::ChaChaEntropy e(31, 0);
  const auto& f = MersennePrime::get(5);
  const qss::SchemeParams params(3, 1, f);
  const auto report = qss::registration_view_test(params, {2}, f.from_u64(7), f.from_u64(19), 30'000, e);
  EXPECT_TRUE(report.uniform());
}

TEST(Leakage, TranscriptsOfDifferentSecretsMatch) {
  qss::ChaChaEntropy e(32, 0);
  const auto& f = MersennePrime::get(5);
  const qss::SchemeParams params(4, 1, f);
  const auto report = qss::transcript_two_sample_test(params, {4}, f.from_u64(3), f.from_u64(11), f.from_u64(27),
                                                      f.from_u64(5), 20'000, e);
  EXPECT_FALSE(report.statistics.empty());
  EXPECT_EQ(report.statistics.size(), report.dofs.size());
  EXPECT_TRUE(report.same_distribution());
}

TEST(Report, LineFormat) {
  EXPECT_EQ(qss::format_report_line({"detm.hand.t1", 25, 25, true}), "detm.hand.t1 statistic=25 bound=25 PASS");
  EXPECT_EQ(qss::format_report_line({"x", 0.5, 1e-3, false}), "x statistic=0.5 bound=0.001 FAIL");
}

TEST(Report, ReducedSuiteCoversEveryCheck) {
  qss::AdversaryOptions o;
  o.forgery_trials = 2'000;
  o.wrong_password_trials = 2'000;
  o.large_field_trials = 50;
  o.view_trials = 3'000;
  o.det_scenarios = 50;
  const auto lines = qss::run_adversary_suite(o);
  std::set<std::string> ids;
  for (const auto& l : lines) ids.insert(l.id);
  EXPECT_EQ(ids.size(), lines.size());
  for (const char* id : {"forgery.honest.q31.l3", "wrong_password.uniform.q31", "leakage.views.q31.t1.n3",
                         "transcript.two_sample.q31.t1", "detm.hand.t1", "detm.random.t12.q31",
                         "detm.zero_iff_correct_guess.q31"}) {
    EXPECT_TRUE(ids.count(id)) << id;
  }
  // The algebraic checks do not depend on the trial counts.
  for (const auto& l : lines) {
    if (l.id.rfind("detm.", 0) == 0 || l.id == "forgery.honest.q31.l3") EXPECT_TRUE(l.pass) << l.id;
  }
}

}  // namespace
