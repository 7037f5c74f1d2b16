#include "qss/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "qss/error.hpp"

namespace qss {

double chi_square_statistic(std::span<const std::uint64_t> observed, std::span<const double> expected) {
  if (observed.size() != expected.size()) fail(ErrorCode::kInvalidArgument, "histogram sizes differ");
  double stat = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double o = static_cast<double>(observed[i]);
    if (expected[i] <= 0) {
      if (o != 0) return INFINITY;
      continue;
    }
    stat += (o - expected[i]) * (o - expected[i]) / expected[i];
  }
  return stat;
}

double chi_square_uniform(std::span<const std::uint64_t> counts) {
  if (counts.size() < 2) fail(ErrorCode::kInvalidArgument, "need at least two bins");
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  std::vector<double> expected(counts.size(), total / static_cast<double>(counts.size()));
  return chi_square_statistic(counts, expected);
}

double chi_square_critical(double dof, double significance) {
  boost::math::chi_squared dist(dof);
  return boost::math::quantile(boost::math::complement(dist, significance));
}

double chi_square_p_value(double statistic, double dof) {
  if (!std::isfinite(statistic)) return 0.0;
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

TwoSampleResult chi_square_two_sample(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) fail(ErrorCode::kInvalidArgument, "histogram sizes differ");
  double na = 0, nb = 0;
  for (auto v : a) na += static_cast<double>(v);
  for (auto v : b) nb += static_cast<double>(v);
  if (na == 0 || nb == 0) fail(ErrorCode::kInvalidArgument, "empty sample");
  const double n = na + nb;
  TwoSampleResult r;
  std::size_t used = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double col = static_cast<double>(a[i] + b[i]);
    if (col == 0) continue;
    ++used;
    const double ea = na * col / n;
    const double eb = nb * col / n;
    r.statistic += (static_cast<double>(a[i]) - ea) * (static_cast<double>(a[i]) - ea) / ea;
    r.statistic += (static_cast<double>(b[i]) - eb) * (static_cast<double>(b[i]) - eb) / eb;
  }
  r.dof = used > 1 ? static_cast<double>(used - 1) : 1.0;
  return r;
}

double binomial_upper_bound(double p, std::uint64_t trials, double sigmas) {
  if (trials == 0) fail(ErrorCode::kInvalidArgument, "no trials");
  return p + sigmas * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

}  // namespace qss
