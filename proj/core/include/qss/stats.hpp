#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace qss {

// Pearson statistic sum (O - E)^2 / E; bins with E = 0 must have O = 0.
double chi_square_statistic(std::span<const std::uint64_t> observed, std::span<const double> expected);
// Goodness of fit against the uniform distribution over all bins.
double chi_square_uniform(std::span<const std::uint64_t> counts);
// Value the statistic exceeds with probability `significance` under H0.
double chi_square_critical(double dof, double significance);
double chi_square_p_value(double statistic, double dof);

struct TwoSampleResult {
  double statistic = 0;
  double dof = 0;
};
// Homogeneity of two histograms over the same bins; empty bins are dropped.
TwoSampleResult chi_square_two_sample(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

// p + sigmas * sqrt(p (1 - p) / trials): the acceptance bound for a
// Monte Carlo estimate of a probability no larger than p.
double binomial_upper_bound(double p, std::uint64_t trials, double sigmas = 3.0);

}  // namespace qss
