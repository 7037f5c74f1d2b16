#include "qss/adversary.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

#include "qss/error.hpp"
#include "qss/stats.hpp"

namespace qss {

namespace {

Quorum lowest_quorum(const SchemeParams& params) {
  Quorum q;
  for (std::uint32_t j = 1; j <= params.quorum_size(); ++j) q.push_back(j);
  return q;
}

std::size_t position(const Quorum& quorum, std::uint32_t member) {
  return static_cast<std::size_t>(std::find(quorum.begin(), quorum.end(), member) - quorum.begin());
}

// Uniform index in [0, k) by rejection.
std::uint64_t uniform_below(EntropySource& entropy, std::uint64_t k) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % k;
  for (;;) {
    const std::uint64_t v = entropy.next_u64();
    if (v < limit) return v % k;
  }
}

std::vector<std::uint32_t> random_subset(std::vector<std::uint32_t> pool, std::size_t k, EntropySource& entropy) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_below(entropy, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::size_t small_value(const FieldElement& e) { return static_cast<std::size_t>(e.to_u64()); }

std::uint64_t small_modulus(const MersennePrime& field) {
  if (field.exponent() > 13) fail(ErrorCode::kInvalidArgument, "histogram tests need a field of at most 2^13 - 1");
  return field.modulus().get_ui();
}

FieldElement nonzero_random(const MersennePrime& field, EntropySource& entropy) {
  for (;;) {
    FieldElement e = field.random(entropy);
    if (!e.is_zero()) return e;
  }
}

FieldElement signed_diff(const MersennePrime& field, std::uint32_t a, std::uint32_t b) {
  return field.from_u64(a) - field.from_u64(b);
}

}  // namespace

// --- in-memory protocol run ----------------------------------------------------

BlockVector simulate_reconstruction(const SimulationInput& in, EntropySource& entropy) {
  const SchemeParams& params = in.params;
  params.validate();
  const MersennePrime& f = params.prime();
  const Quorum quorum = in.quorum.empty() ? lowest_quorum(params) : normalize_quorum(in.quorum, params);
  check_quorum_size(quorum, params);
  const std::size_t width = in.blocks.size() + 1;
  if (!in.response_offsets.empty() && in.response_offsets.size() != width) {
    fail(ErrorCode::kInvalidArgument, "need one response offset per block including the MAC");
  }
  if (!in.zero_offsets.empty() && in.zero_offsets.size() != width) {
    fail(ErrorCode::kInvalidArgument, "need one zero-share offset per block including the MAC");
  }

  BlockVector data;
  data.blocks = in.blocks;
  const auto bundles = register_blocks(data, in.password, params, entropy);

  // sets[i][b]: member quorum[i]'s set for block b + 1.
  const std::size_t k = quorum.size();
  std::vector<std::vector<PrecomputedSet>> sets(k);
  for (std::size_t b = 0; b < width; ++b) {
    std::vector<std::vector<FieldElement>> r(k, std::vector<FieldElement>(k));
    std::vector<std::vector<FieldElement>> z(k, std::vector<FieldElement>(k));
    for (std::size_t h = 0; h < k; ++h) {
      PrecomputedContribution pc = gen_precomputed_contribution(params, quorum, quorum[h], entropy);
      for (std::size_t i = 0; i < k; ++i) {
        if (quorum[h] == in.corrupted && i != h && !in.zero_offsets.empty()) pc.zero_shares[i] += in.zero_offsets[b];
        r[i][h] = std::move(pc.randomizer_shares[i]);
        z[i][h] = std::move(pc.zero_shares[i]);
      }
    }
    for (std::size_t i = 0; i < k; ++i) {
      sets[i].emplace_back(quorum, static_cast<std::uint32_t>(b + 1), quorum[i], std::move(r[i]), std::move(z[i]));
    }
  }

  const auto requests = make_request(in.guess, params, quorum, entropy);
  std::vector<ReconstructionResponse> responses(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint32_t j = quorum[i];
    responses[i].point = j;
    for (std::size_t b = 0; b < width; ++b) {
      FieldElement v = respond(params, bundles[j - 1], sets[i][b], requests[i], static_cast<std::uint32_t>(b + 1));
      if (j == in.corrupted && !in.response_offsets.empty()) v += in.response_offsets[b];
      responses[i].values.push_back(std::move(v));
    }
  }
  (void)f;
  return reconstruct(responses, params, 0);
}

ForgeryOutcome forgery_outcome(const SchemeParams& params, std::uint32_t l, const ForgeryAttack& attack,
                               EntropySource& entropy) {
  if (l == 0) fail(ErrorCode::kInvalidArgument, "need at least one block");
  const MersennePrime& f = params.prime();
  SimulationInput in;
  in.params = params;
  for (std::uint32_t i = 0; i < l; ++i) in.blocks.push_back(f.random(entropy));
  in.password = f.random(entropy);
  in.guess = in.password;
  in.quorum = lowest_quorum(params);
  in.corrupted = attack.corrupted != 0 ? attack.corrupted : in.quorum.back();
  in.response_offsets = attack.response_offsets;
  in.zero_offsets = attack.zero_offsets;

  const BlockVector bv = simulate_reconstruction(in, entropy);
  ForgeryOutcome out;
  out.altered = bv.blocks != in.blocks || *bv.mac_block != compute_mac(in.blocks, in.password);
  out.accepted = compute_mac(bv.blocks, in.password) == *bv.mac_block;
  return out;
}

bool forgery_trial(const SchemeParams& params, std::uint32_t l, const ForgeryAttack& attack, EntropySource& entropy) {
  return forgery_outcome(params, l, attack, entropy).accepted;
}

// --- views of t corrupted servers ----------------------------------------------

Quorum AttackScenario::quorum() const {
  Quorum q(corrupted.begin(), corrupted.end());
  q.insert(q.end(), honest.begin(), honest.end());
  std::sort(q.begin(), q.end());
  return q;
}

void AttackScenario::validate() const {
  params.validate();
  if (corrupted.size() != params.t || honest.size() != params.t + 1) {
    fail(ErrorCode::kInvalidArgument, "scenario needs t corrupted and t + 1 honest members");
  }
  const Quorum q = normalize_quorum(quorum(), params);
  if (q.size() != params.quorum_size()) fail(ErrorCode::kInvalidArgument, "corrupted and honest sets overlap");
  if (password_poly.degree_bound() != params.t || guess_poly.degree_bound() != params.t ||
      data_poly.degree_bound() != 2 * params.t) {
    fail(ErrorCode::kInvalidArgument, "scenario polynomials have the wrong degree");
  }
  for (const auto* table : {&corrupt_randomizer, &corrupt_zero}) {
    if (table->empty()) continue;
    if (table->size() != params.t) fail(ErrorCode::kInvalidArgument, "corrupted share table has the wrong shape");
    for (const auto& row : *table) {
      if (row.size() != q.size()) fail(ErrorCode::kInvalidArgument, "corrupted share table has the wrong shape");
    }
  }
  if (corrupt_randomizer.empty() != corrupt_zero.empty()) {
    fail(ErrorCode::kInvalidArgument, "corrupted tables must both be given or both be empty");
  }
}

bool AttackScenario::degenerate() const {
  return guess_poly.coefficients().front() == password_poly.coefficients().front();
}

AttackScenario random_scenario(const SchemeParams& params, EntropySource& entropy, bool wrong_guess,
                               bool arbitrary_corrupt_shares) {
  params.validate();
  const MersennePrime& f = params.prime();
  std::vector<std::uint32_t> all(params.n);
  std::iota(all.begin(), all.end(), 1u);
  const auto members = random_subset(all, params.quorum_size(), entropy);
  const auto corrupted = random_subset(members, params.t, entropy);
  std::vector<std::uint32_t> honest;
  for (auto j : members) {
    if (!std::binary_search(corrupted.begin(), corrupted.end(), j)) honest.push_back(j);
  }
  const FieldElement p = f.random(entropy);
  FieldElement guess = f.random(entropy);
  while (wrong_guess && guess == p) guess = f.random(entropy);
  if (!wrong_guess) guess = p;

  AttackScenario s{params,
                   corrupted,
                   honest,
                   SharePolynomial::random(p, params.t, entropy),
                   SharePolynomial::random(f.random(entropy), 2 * params.t, entropy),
                   SharePolynomial::random(guess, params.t, entropy),
                   {},
                   {}};
  if (arbitrary_corrupt_shares) {
    for (std::uint32_t c = 0; c < params.t; ++c) {
      std::vector<FieldElement> r, z;
      for (std::size_t x = 0; x < members.size(); ++x) {
        r.push_back(f.random(entropy));
        z.push_back(f.random(entropy));
      }
      s.corrupt_randomizer.push_back(std::move(r));
      s.corrupt_zero.push_back(std::move(z));
    }
  }
  return s;
}

AttackView attack_view(const AttackScenario& s, EntropySource& entropy) {
  s.validate();
  const SchemeParams& params = s.params;
  const MersennePrime& f = params.prime();
  const Quorum quorum = s.quorum();
  const std::size_t k = quorum.size();

  // contrib_r[x][y]: contributor quorum[x]'s randomizer share for member quorum[y].
  std::vector<std::vector<FieldElement>> contrib_r(k), contrib_z(k);
  for (std::size_t x = 0; x < k; ++x) {
    const std::uint32_t who = quorum[x];
    const auto cpos = std::find(s.corrupted.begin(), s.corrupted.end(), who);
    if (cpos != s.corrupted.end() && !s.corrupt_randomizer.empty()) {
      const auto c = static_cast<std::size_t>(cpos - s.corrupted.begin());
      contrib_r[x] = s.corrupt_randomizer[c];
      contrib_z[x] = s.corrupt_zero[c];
      continue;
    }
    const PrecomputedContribution pc = gen_precomputed_contribution(params, quorum, who, entropy);
    contrib_r[x] = pc.randomizer_shares;
    contrib_z[x] = pc.zero_shares;
  }

  std::vector<Share> responses;
  std::vector<FieldElement> f_values(k);
  for (std::size_t y = 0; y < k; ++y) {
    const std::uint32_t j = quorum[y];
    std::vector<FieldElement> r, z;
    for (std::size_t x = 0; x < k; ++x) {
      r.push_back(contrib_r[x][y]);
      z.push_back(contrib_z[x][y]);
    }
    PrecomputedSet set(quorum, 1, j, std::move(r), std::move(z));
    RegistrationBundle bundle;
    bundle.server = j;
    bundle.data_shares = {s.data_poly.evaluate(j)};
    bundle.password_share = s.password_poly.evaluate(j);
    ReconstructionRequest request;
    request.quorum = quorum;
    request.point = j;
    request.password_share = s.guess_poly.evaluate(j);
    f_values[y] = respond(params, bundle, set, request, 1);
    responses.push_back(Share{j, f_values[y]});
  }

  AttackView view;
  for (std::uint32_t c : s.corrupted) {
    FieldElement acc = f.zero();
    for (std::uint32_t h : s.honest) acc += contrib_r[position(quorum, h)][position(quorum, c)];
    view.coordinates.push_back(acc);
  }
  for (std::uint32_t h : s.honest) view.coordinates.push_back(f_values[position(quorum, h)]);
  for (std::uint32_t c : s.corrupted) {
    FieldElement acc = f.zero();
    for (std::uint32_t h : s.honest) acc += contrib_z[position(quorum, h)][position(quorum, c)];
    view.coordinates.push_back(acc);
  }
  view.reconstructed = interpolate_at_zero(responses, params.data_degree());
  return view;
}

bool UniformityReport::uniform() const {
  if (degenerate) return false;
  for (double s : statistics) {
    if (!(s < critical)) return false;
  }
  return pair_critical == 0 || pair_max < pair_critical;
}

namespace {

// Histograms every coordinate and every coordinate pair of `draw()`.
template <typename Draw>
UniformityReport histogram_test(std::size_t coords, std::uint64_t q, std::uint64_t trials, double significance,
                                Draw&& draw) {
  std::vector<std::vector<std::uint64_t>> single(coords, std::vector<std::uint64_t>(q));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < coords; ++a) {
    for (std::size_t b = a + 1; b < coords; ++b) pairs.emplace_back(a, b);
  }
  const bool joint = q * q <= 1u << 16;
  std::vector<std::vector<std::uint64_t>> paired(joint ? pairs.size() : 0, std::vector<std::uint64_t>(q * q));
  for (std::uint64_t i = 0; i < trials; ++i) {
    const std::vector<std::size_t> v = draw();
    for (std::size_t c = 0; c < coords; ++c) ++single[c][v[c]];
    if (joint) {
      for (std::size_t p = 0; p < pairs.size(); ++p) ++paired[p][v[pairs[p].first] * q + v[pairs[p].second]];
    }
  }
  UniformityReport r;
  r.dof = static_cast<double>(q - 1);
  r.critical = chi_square_critical(r.dof, significance);
  for (const auto& h : single) r.statistics.push_back(chi_square_uniform(h));
  if (joint && !pairs.empty()) {
    r.pair_critical = chi_square_critical(static_cast<double>(q * q - 1), significance / static_cast<double>(pairs.size()));
    for (const auto& h : paired) r.pair_max = std::max(r.pair_max, chi_square_uniform(h));
  }
  return r;
}

}  // namespace

UniformityReport leakage_view_test(const AttackScenario& scenario, std::uint64_t trials, EntropySource& entropy,
                                   double significance) {
  scenario.validate();
  if (scenario.degenerate()) {
    UniformityReport r;
    r.degenerate = true;
    return r;
  }
  const std::uint64_t q = small_modulus(scenario.params.prime());
  const std::size_t coords = 3 * scenario.params.t + 1;
  return histogram_test(coords, q, trials, significance, [&] {
    const AttackView view = attack_view(scenario, entropy);
    std::vector<std::size_t> v;
    for (const auto& e : view.coordinates) v.push_back(small_value(e));
    return v;
  });
}

UniformityReport registration_view_test(const SchemeParams& params, const std::vector<std::uint32_t>& corrupted,
                                        const FieldElement& password, const FieldElement& data, std::uint64_t trials,
                                        EntropySource& entropy, double significance) {
  params.validate();
  if (corrupted.size() > params.t) fail(ErrorCode::kInvalidArgument, "at most t corrupted servers");
  const std::uint64_t q = small_modulus(params.prime());
  return histogram_test(2 * corrupted.size(), q, trials, significance, [&] {
    const auto p = SharePolynomial::random(password, params.password_degree(), entropy);
    const auto d = SharePolynomial::random(data, params.data_degree(), entropy);
    std::vector<std::size_t> v;
    for (auto c : corrupted) v.push_back(small_value(p.evaluate(c)));
    for (auto c : corrupted) v.push_back(small_value(d.evaluate(c)));
    return v;
  });
}

bool TwoSampleReport::same_distribution() const {
  for (std::size_t i = 0; i < statistics.size(); ++i) {
    if (!(statistics[i] < chi_square_critical(dofs[i], significance))) return false;
  }
  return true;
}

TwoSampleReport transcript_two_sample_test(const SchemeParams& params, const std::vector<std::uint32_t>& corrupted,
                                           const FieldElement& data_a, const FieldElement& password_a,
                                           const FieldElement& data_b, const FieldElement& password_b,
                                           std::uint64_t trials, EntropySource& entropy, double significance) {
  params.validate();
  if (corrupted.empty() || corrupted.size() > params.t) fail(ErrorCode::kInvalidArgument, "need 1..t corrupted servers");
  const std::uint64_t q = small_modulus(params.prime());
  Quorum quorum(corrupted.begin(), corrupted.end());
  for (std::uint32_t j = 1; j <= params.n && quorum.size() < params.quorum_size(); ++j) {
    if (std::find(corrupted.begin(), corrupted.end(), j) == corrupted.end()) quorum.push_back(j);
  }
  quorum = normalize_quorum(quorum, params);
  std::vector<std::uint32_t> honest;
  for (auto j : quorum) {
    if (std::find(corrupted.begin(), corrupted.end(), j) == corrupted.end()) honest.push_back(j);
  }

  // Per corrupted c: f_P(c), f_D(c), f_{R_h}(c) and f_{0_h}(c) per honest h, f_{P'}(c).
  const std::size_t per_c = 3 + 2 * honest.size();
  const std::size_t coords = per_c * corrupted.size();
  auto sample = [&](const FieldElement& data, const FieldElement& password) {
    std::vector<std::vector<std::uint64_t>> hist(coords, std::vector<std::uint64_t>(q));
    for (std::uint64_t i = 0; i < trials; ++i) {
      const auto p = SharePolynomial::random(password, params.password_degree(), entropy);
      const auto d = SharePolynomial::random(data, params.data_degree(), entropy);
      std::vector<PrecomputedContribution> pcs;
      for (auto h : honest) pcs.push_back(gen_precomputed_contribution(params, quorum, h, entropy));
      const auto requests = make_request(password, params, quorum, entropy);
      for (std::size_t ci = 0; ci < corrupted.size(); ++ci) {
        const std::uint32_t c = corrupted[ci];
        const std::size_t cpos = position(quorum, c);
        std::size_t k = ci * per_c;
        ++hist[k++][small_value(p.evaluate(c))];
        ++hist[k++][small_value(d.evaluate(c))];
        for (const auto& pc : pcs) {
          ++hist[k++][small_value(pc.randomizer_shares[cpos])];
          ++hist[k++][small_value(pc.zero_shares[cpos])];
        }
        ++hist[k++][small_value(requests[cpos].password_share)];
      }
    }
    return hist;
  };
  const auto a = sample(data_a, password_a);
  const auto b = sample(data_b, password_b);
  TwoSampleReport r;
  r.significance = significance;
  for (std::size_t i = 0; i < coords; ++i) {
    const TwoSampleResult t = chi_square_two_sample(a[i], b[i]);
    r.statistics.push_back(t.statistic);
    r.dofs.push_back(t.dof);
  }
  return r;
}

// --- determinant machinery -----------------------------------------------------

namespace {

void check_det_scenario(const DetScenario& s) {
  if (!s.field) fail(ErrorCode::kInvalidArgument, "scenario has no field");
  if (s.t == 0 || s.corrupted.size() != s.t || s.honest.size() != s.t + 1 || s.delta.size() != s.t + 1) {
    fail(ErrorCode::kInvalidArgument, "scenario dimensions do not match t");
  }
  std::vector<std::uint32_t> all(s.corrupted);
  all.insert(all.end(), s.honest.begin(), s.honest.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end() || all.front() == 0 ||
      s.field->modulus() <= all.back()) {
    fail(ErrorCode::kInvalidArgument, "scenario points must be distinct, nonzero and below q");
  }
}

}  // namespace

DetScenario det_scenario(const AttackScenario& scenario) {
  scenario.validate();
  DetScenario d;
  d.field = &scenario.params.prime();
  d.t = scenario.params.t;
  d.corrupted = scenario.corrupted;
  d.honest = scenario.honest;
  for (auto h : scenario.honest) d.delta.push_back(scenario.password_poly.evaluate(h) - scenario.guess_poly.evaluate(h));
  return d;
}

DetScenario random_det_scenario(const MersennePrime& field, unsigned t, std::uint32_t n, EntropySource& entropy) {
  if (n < 2 * t + 1) fail(ErrorCode::kInvalidArgument, "n must be at least 2t + 1");
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 1u);
  const auto members = random_subset(all, 2 * t + 1, entropy);
  DetScenario d;
  d.field = &field;
  d.t = t;
  d.corrupted = random_subset(members, t, entropy);
  for (auto j : members) {
    if (!std::binary_search(d.corrupted.begin(), d.corrupted.end(), j)) d.honest.push_back(j);
  }
  for (unsigned i = 0; i <= t; ++i) d.delta.push_back(field.random(entropy));
  return d;
}

DetMInput assemble_det_m(const DetScenario& s) {
  check_det_scenario(s);
  const MersennePrime& f = *s.field;
  const unsigned t = s.t;
  const std::size_t size = 3 * t + 1;
  DetMInput m;
  m.field = &f;
  auto row = [&] { return std::vector<FieldElement>(size, f.zero()); };
  // A: 1, c, .., c^t | 0
  for (auto c : s.corrupted) {
    auto r = row();
    for (unsigned i = 0; i <= t; ++i) r[i] = f.from_u64(c).pow(std::uint64_t{i});
    m.rows.push_back(std::move(r));
  }
  // E | K: Delta_h h^i (i = 0..t) | h^i (i = 1..2t)
  for (std::size_t k = 0; k < s.honest.size(); ++k) {
    const FieldElement h = f.from_u64(s.honest[k]);
    auto r = row();
    for (unsigned i = 0; i <= t; ++i) r[i] = s.delta[k] * h.pow(std::uint64_t{i});
    for (unsigned i = 1; i <= 2 * t; ++i) r[t + i] = h.pow(std::uint64_t{i});
    m.rows.push_back(std::move(r));
  }
  // 0 | B: c^i (i = 1..2t)
  for (auto c : s.corrupted) {
    auto r = row();
    for (unsigned i = 1; i <= 2 * t; ++i) r[t + i] = f.from_u64(c).pow(std::uint64_t{i});
    m.rows.push_back(std::move(r));
  }
  return m;
}

FieldElement det_m_bruteforce(const DetMInput& input) {
  if (!input.field) fail(ErrorCode::kInvalidArgument, "matrix has no field");
  const MersennePrime& f = *input.field;
  const std::size_t n = input.rows.size();
  if (n == 0 || (n - 1) % 3 != 0) fail(ErrorCode::kInvalidArgument, "matrix size is not 3t + 1");
  auto a = input.rows;
  for (const auto& r : a) {
    if (r.size() != n) fail(ErrorCode::kInvalidArgument, "matrix is not square");
  }
  FieldElement det = f.one();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && a[pivot][col].is_zero()) ++pivot;
    if (pivot == n) return f.zero();
    if (pivot != col) {
      std::swap(a[pivot], a[col]);
      det = -det;
    }
    det *= a[col][col];
    const FieldElement inv_pivot = a[col][col].inv();
    for (std::size_t r = col + 1; r < n; ++r) {
      if (a[r][col].is_zero()) continue;
      const FieldElement factor = a[r][col] * inv_pivot;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
    }
  }
  return det;
}

FieldElement det_m_closed_form(const DetScenario& s) {
  check_det_scenario(s);
  const MersennePrime& f = *s.field;
  std::vector<Share> g;
  for (std::size_t k = 0; k < s.honest.size(); ++k) g.push_back(Share{s.honest[k], s.delta[k]});
  const FieldElement difference_at_zero = interpolate_at_zero(g, s.t);

  FieldElement v = s.t % 2 == 0 ? f.one() : -f.one();
  FieldElement corrupted_vdm = f.one();
  for (std::size_t i = 0; i < s.corrupted.size(); ++i) {
    v *= f.from_u64(s.corrupted[i]);
    for (std::size_t j = i + 1; j < s.corrupted.size(); ++j) {
      corrupted_vdm *= signed_diff(f, s.corrupted[j], s.corrupted[i]);
    }
  }
  v *= corrupted_vdm * corrupted_vdm;
  for (auto h : s.honest) {
    for (auto c : s.corrupted) v *= signed_diff(f, c, h);
  }
  for (std::size_t i = 0; i < s.honest.size(); ++i) {
    for (std::size_t j = i + 1; j < s.honest.size(); ++j) v *= signed_diff(f, s.honest[j], s.honest[i]);
  }
  return v * difference_at_zero;
}

// --- report ----------------------------------------------------------------------

std::string format_report_line(const ReportLine& line) {
  char buf[128];
  std::snprintf(buf, sizeof buf, " statistic=%.6g bound=%.6g ", line.statistic, line.bound);
  return line.id + buf + (line.pass ? "PASS" : "FAIL");
}

std::vector<ReportLine> run_adversary_suite(const AdversaryOptions& o) {
  std::vector<ReportLine> out;
  ChaChaEntropy entropy(o.seed, 0);
  const MersennePrime& f31 = MersennePrime::get(5);
  const SchemeParams small(4, 1, f31);

  auto random_offsets = [&](const MersennePrime& f, std::uint32_t width) {
    std::vector<FieldElement> v;
    for (std::uint32_t i = 0; i < width; ++i) v.push_back(f.random(entropy));
    // At least one offset is nonzero.
    v[uniform_below(entropy, width)] = nonzero_random(f, entropy);
    return v;
  };

  // Honest runs always verify.
  {
    std::uint64_t accepted = 0;
    const std::uint64_t trials = std::min<std::uint64_t>(o.forgery_trials, 1000);
    for (std::uint64_t i = 0; i < trials; ++i) accepted += forgery_trial(small, 3, {}, entropy) ? 1 : 0;
    const double rate = static_cast<double>(accepted) / static_cast<double>(trials);
    out.push_back({"forgery.honest.q31.l3", rate, 1.0, accepted == trials});
  }
  // Additive offsets on one corrupted response.
  for (const auto& [m, l] : {std::pair<unsigned, std::uint32_t>{5, 3}, {13, 10}}) {
    const MersennePrime& f = MersennePrime::get(m);
    const SchemeParams params(4, 1, f);
    std::uint64_t accepted = 0;
    for (std::uint64_t i = 0; i < o.forgery_trials; ++i) {
      ForgeryAttack attack;
      attack.response_offsets = random_offsets(f, l + 1);
      accepted += forgery_trial(params, l, attack, entropy) ? 1 : 0;
    }
    const double p = static_cast<double>(l) / static_cast<double>(f.modulus().get_ui());
    const double rate = static_cast<double>(accepted) / static_cast<double>(o.forgery_trials);
    const double bound = binomial_upper_bound(p, o.forgery_trials);
    out.push_back({"forgery.offsets.q" + f.modulus().get_str() + ".l" + std::to_string(l), rate, bound, rate <= bound});
  }
  // Manipulated zero shares plus response offsets; rate over altered runs.
  {
    std::uint64_t altered = 0, accepted = 0;
    for (std::uint64_t i = 0; i < o.forgery_trials; ++i) {
      ForgeryAttack attack;
      attack.zero_offsets = random_offsets(f31, 4);
      attack.response_offsets = random_offsets(f31, 4);
      const ForgeryOutcome r = forgery_outcome(small, 3, attack, entropy);
      if (!r.altered) continue;
      ++altered;
      accepted += r.accepted ? 1 : 0;
    }
    const double rate = altered ? static_cast<double>(accepted) / static_cast<double>(altered) : 0.0;
    const double bound = binomial_upper_bound(3.0 / 31.0, std::max<std::uint64_t>(altered, 1));
    out.push_back({"forgery.zero_shares.q31.l3", rate, bound, altered > 0 && rate <= bound});
  }

  // Wrong passwords: acceptance rate and uniformity of what is reconstructed.
  {
    std::vector<FieldElement> blocks;
    for (int i = 0; i < 3; ++i) blocks.push_back(f31.random(entropy));
    const FieldElement password = f31.random(entropy);
    std::uint64_t accepted = 0;
    std::vector<std::uint64_t> hist(31);
    for (std::uint64_t i = 0; i < o.wrong_password_trials; ++i) {
      SimulationInput in;
      in.params = small;
      in.blocks = blocks;
      in.password = password;
      do {
        in.guess = f31.random(entropy);
      } while (in.guess == password);
      const BlockVector bv = simulate_reconstruction(in, entropy);
      accepted += compute_mac(bv.blocks, password) == *bv.mac_block ? 1 : 0;
      for (const auto& block : bv.blocks) ++hist[small_value(block)];
    }
    const double rate = static_cast<double>(accepted) / static_cast<double>(o.wrong_password_trials);
    const double bound = binomial_upper_bound(3.0 / 31.0, o.wrong_password_trials);
    out.push_back({"wrong_password.accept.q31.l3", rate, bound, rate <= bound});
    // Blocks of one attempt are masked by independent randomizers, so all
    // of them go into one histogram and one test.
    const double statistic = chi_square_uniform(hist);
    const double critical = chi_square_critical(30, 0.01);
    out.push_back({"wrong_password.uniform.q31", statistic, critical, statistic < critical});
  }
  {
    const MersennePrime& f = MersennePrime::get(521);
    const SchemeParams params(4, 1, f);
    std::uint64_t accepted = 0;
    for (std::uint64_t i = 0; i < o.large_field_trials; ++i) {
      SimulationInput in;
      in.params = params;
      in.blocks = {f.random(entropy), f.random(entropy), f.random(entropy)};
      in.password = f.random(entropy);
      in.guess = f.random(entropy);
      const BlockVector bv = simulate_reconstruction(in, entropy);
      accepted += compute_mac(bv.blocks, in.password) == *bv.mac_block ? 1 : 0;
    }
    out.push_back({"wrong_password.accept.m521", static_cast<double>(accepted), 0.0, accepted == 0});
  }

  // Views of a corrupted server impersonating the owner.
  {
    const SchemeParams params(3, 1, f31);
    const AttackScenario scenario = random_scenario(params, entropy, true, true);
    const UniformityReport r = leakage_view_test(scenario, o.view_trials, entropy);
    const double worst = r.statistics.empty() ? 0 : *std::max_element(r.statistics.begin(), r.statistics.end());
    out.push_back({"leakage.views.q31.t1.n3", worst, r.critical, !r.degenerate && worst < r.critical});
    out.push_back({"leakage.views_pairs.q31.t1.n3", r.pair_max, r.pair_critical, r.pair_max < r.pair_critical});

    const AttackScenario correct = random_scenario(params, entropy, false, false);
    std::uint64_t wrong = 0;
    for (int i = 0; i < 1000; ++i) {
      wrong += attack_view(correct, entropy).reconstructed == correct.data_poly.coefficients().front() ? 0 : 1;
    }
    out.push_back({"leakage.correct_guess.q31", static_cast<double>(wrong), 0.0, wrong == 0});

    const UniformityReport v12 = registration_view_test(params, {2}, f31.from_u64(7), f31.from_u64(19),
                                                        o.view_trials, entropy);
    const double v12_worst = *std::max_element(v12.statistics.begin(), v12.statistics.end());
    out.push_back({"leakage.registration_shares.q31", v12_worst, v12.critical, v12.uniform()});
  }
  {
    const SchemeParams params(4, 1, f31);
    const TwoSampleReport r = transcript_two_sample_test(params, {4}, f31.from_u64(3), f31.from_u64(11),
                                                         f31.from_u64(27), f31.from_u64(5), o.view_trials, entropy);
    double worst = 0, bound = 0;
    for (std::size_t i = 0; i < r.statistics.size(); ++i) {
      const double crit = chi_square_critical(r.dofs[i], r.significance);
      if (r.statistics[i] - crit > worst - bound || i == 0) {
        worst = r.statistics[i];
        bound = crit;
      }
    }
    out.push_back({"transcript.two_sample.q31.t1", worst, bound, r.same_distribution()});
  }

  // Determinant of M: hand instance, random agreement, and the zero criterion.
  {
    DetScenario hand{&f31, 1, {3}, {1, 2}, {f31.one(), f31.one()}};
    const FieldElement brute = det_m_bruteforce(assemble_det_m(hand));
    const FieldElement closed = det_m_closed_form(hand);
    out.push_back({"detm.hand.t1", static_cast<double>(brute.to_u64()), 25.0,
                   brute.to_u64() == 25 && closed.to_u64() == 25});
  }
  {
    std::uint64_t mismatches = 0;
    for (std::uint64_t i = 0; i < o.det_scenarios; ++i) {
      const unsigned t = i % 2 == 0 ? 1 : 2;
      const std::uint32_t n = 2 * t + 1 + static_cast<std::uint32_t>(uniform_below(entropy, 4));
      const DetScenario s = random_det_scenario(f31, t, n, entropy);
      mismatches += det_m_bruteforce(assemble_det_m(s)) == det_m_closed_form(s) ? 0 : 1;
    }
    out.push_back({"detm.random.t12.q31", static_cast<double>(mismatches), 0.0, mismatches == 0});
  }
  {
    // f_P(x) = P + 5x, f_{P'}(x) = P' + 9x with C = {3}, H = {1, 2}.
    std::uint64_t violations = 0;
    for (std::uint64_t p = 0; p < 31; ++p) {
      for (std::uint64_t g = 0; g < 31; ++g) {
        DetScenario s{&f31, 1, {3}, {1, 2}, {}};
        for (std::uint32_t h : s.honest) {
          s.delta.push_back((f31.from_u64(p) + f31.from_u64(5) * f31.from_u64(h)) -
                            (f31.from_u64(g) + f31.from_u64(9) * f31.from_u64(h)));
        }
        const bool zero = det_m_bruteforce(assemble_det_m(s)).is_zero();
        violations += zero == (p == g) ? 0 : 1;
      }
    }
    out.push_back({"detm.zero_iff_correct_guess.q31", static_cast<double>(violations), 0.0, violations == 0});
  }
  return out;
}

}  // namespace qss
