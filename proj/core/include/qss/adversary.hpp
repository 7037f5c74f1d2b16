#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qss/entropy.hpp"
#include "qss/field.hpp"
#include "qss/scheme.hpp"
#include "qss/sharing.hpp"

namespace qss {

// --- in-memory protocol run ----------------------------------------------------

// One register / precompute / request-response run without any transport,
// with hooks for a corrupted quorum member.
struct SimulationInput {
  SchemeParams params;
  std::vector<FieldElement> blocks;  // D_1 .. D_l
  FieldElement password;             // P
  FieldElement guess;                // P'
  Quorum quorum;                     // empty: lowest 2t + 1 indices
  std::uint32_t corrupted = 0;       // 0: every member is honest
  // Added to the corrupted member's F value per block 1 .. l + 1.
  std::vector<FieldElement> response_offsets;
  // Added, per block, to the zero shares the corrupted member hands to others.
  std::vector<FieldElement> zero_offsets;
};

// Interpolated blocks and MAC block as the owner would see them.
BlockVector simulate_reconstruction(const SimulationInput& input, EntropySource& entropy);

struct ForgeryAttack {
  std::vector<FieldElement> response_offsets;
  std::vector<FieldElement> zero_offsets;
  std::uint32_t corrupted = 0;  // 0: the highest quorum member
};

struct ForgeryOutcome {
  bool altered = false;   // reconstructed blocks differ from the registered ones
  bool accepted = false;  // the MAC check passed
};

// Random data and a uniformly drawn password, correct guess, one corrupted
// member deviating as described by `attack`.
ForgeryOutcome forgery_outcome(const SchemeParams& params, std::uint32_t l, const ForgeryAttack& attack,
                               EntropySource& entropy);
bool forgery_trial(const SchemeParams& params, std::uint32_t l, const ForgeryAttack& attack, EntropySource& entropy);

// --- views of t corrupted servers ----------------------------------------------

// An attacker holding the corrupted set C impersonates the owner towards
// the honest members H of a quorum L = C u H.
struct AttackScenario {
  SchemeParams params;
  std::vector<std::uint32_t> corrupted;  // c_1 < ... < c_t
  std::vector<std::uint32_t> honest;     // h_1 < ... < h_{t+1}
  SharePolynomial password_poly;         // f_P, degree t
  SharePolynomial data_poly;             // f_D, degree 2t (one block)
  SharePolynomial guess_poly;            // f_{P'}, degree t
  // R_c^{(x)} and Z_c^{(x)} for every corrupted c and every member x of L,
  // indexed [c position][x position in L]. Empty: corrupted servers follow
  // the protocol with fresh polynomials each trial.
  std::vector<std::vector<FieldElement>> corrupt_randomizer;
  std::vector<std::vector<FieldElement>> corrupt_zero;

  Quorum quorum() const;
  void validate() const;
  bool degenerate() const;  // f_{P'}(0) = P
};

// Random polynomials over `params`; C and H drawn from 1..n. With
// `wrong_guess` the guess differs from P at zero.
AttackScenario random_scenario(const SchemeParams& params, EntropySource& entropy, bool wrong_guess = true,
                               bool arbitrary_corrupt_shares = true);

// (sum_h f_{R_h}(c) for c in C, F_h for h in H, sum_h f_{0_h}(c) for c in C):
// the 3t + 1 values that vary per attempt. F_h comes from the server's
// own respond().
struct AttackView {
  std::vector<FieldElement> coordinates;
  // f(0) interpolated from all 2t + 1 responses, the corrupted ones
  // computed as the protocol prescribes.
  FieldElement reconstructed;
};
AttackView attack_view(const AttackScenario& scenario, EntropySource& entropy);

struct UniformityReport {
  std::vector<double> statistics;  // one per coordinate
  double dof = 0;
  double critical = 0;             // at the requested significance
  double pair_max = 0;             // largest pairwise joint statistic
  double pair_critical = 0;        // Bonferroni-corrected over all pairs
  bool degenerate = false;
  bool uniform() const;
};

// Chi-square per coordinate, plus all coordinate pairs jointly, over
// `trials` independent attempts. Only meaningful for small q.
UniformityReport leakage_view_test(const AttackScenario& scenario, std::uint64_t trials, EntropySource& entropy,
                                   double significance = 0.01);

// V_1 and V_2: the corrupted servers' registration shares over fresh
// registrations of a fixed (P, D).
UniformityReport registration_view_test(const SchemeParams& params, const std::vector<std::uint32_t>& corrupted,
                                        const FieldElement& password, const FieldElement& data, std::uint64_t trials,
                                        EntropySource& entropy, double significance = 0.01);

// Everything t corrupted servers see in honest runs for one (D, P):
// registration shares, honest precomputation shares addressed to them and
// the owner's request shares. Compared across two (D, P) pairs.
struct TwoSampleReport {
  std::vector<double> statistics;
  std::vector<double> dofs;
  double significance = 0;
  bool same_distribution() const;
};
TwoSampleReport transcript_two_sample_test(const SchemeParams& params, const std::vector<std::uint32_t>& corrupted,
                                           const FieldElement& data_a, const FieldElement& password_a,
                                           const FieldElement& data_b, const FieldElement& password_b,
                                           std::uint64_t trials, EntropySource& entropy, double significance = 0.01);

// --- determinant machinery -----------------------------------------------------

struct DetScenario {
  const MersennePrime* field = nullptr;
  unsigned t = 0;
  std::vector<std::uint32_t> corrupted;  // C, t points
  std::vector<std::uint32_t> honest;     // H, t + 1 points
  std::vector<FieldElement> delta;       // Delta_h = f_P(h) - f_{P'}(h), h in H
};

DetScenario det_scenario(const AttackScenario& scenario);
DetScenario random_det_scenario(const MersennePrime& field, unsigned t, std::uint32_t n, EntropySource& entropy);

// M = [A 0; E K; 0 B], square of size 3t + 1.
struct DetMInput {
  const MersennePrime* field = nullptr;
  std::vector<std::vector<FieldElement>> rows;
};

DetMInput assemble_det_m(const DetScenario& scenario);
// Gaussian elimination over GF(q).
FieldElement det_m_bruteforce(const DetMInput& input);
// (-1)^t (prod c)(prod (c' - c))^2 (prod_h prod_c (c - h))(prod (h' - h)) (f_P(0) - f_{P'}(0)).
FieldElement det_m_closed_form(const DetScenario& scenario);

// --- report ----------------------------------------------------------------------

struct ReportLine {
  std::string id;
  double statistic = 0;
  double bound = 0;
  bool pass = false;
};

// "<id> statistic=<x> bound=<y> PASS|FAIL"
std::string format_report_line(const ReportLine& line);

struct AdversaryOptions {
  std::uint64_t seed = 1;
  std::uint64_t forgery_trials = 100'000;
  std::uint64_t wrong_password_trials = 100'000;
  std::uint64_t large_field_trials = 1'000;
  std::uint64_t view_trials = 100'000;
  std::uint64_t det_scenarios = 1'000;
};

// Every check of the harness, in a fixed order.
std::vector<ReportLine> run_adversary_suite(const AdversaryOptions& options);

}  // namespace qss
