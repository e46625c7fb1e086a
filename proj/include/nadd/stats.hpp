#pragma once

#include <span>
#include <utility>

namespace nadd::stats {

inline constexpr double kZ95 = 1.959963984540054;

/// Wilson score interval for a binomial proportion.
std::pair<double, double> wilson_interval(int successes, int trials, double z = kZ95);

/// One-sided pooled two-proportion z-test of H1: p1 > p2.
struct TwoProportionTest {
  double p1;
  double p2;
  double z;
  double p_value;
  bool significant(double alpha = 0.05) const { return p_value < alpha; }
};
TwoProportionTest two_proportion_greater(int successes1, int trials1, int successes2, int trials2);

/// Upper-tail probability of a chi-square statistic.
double chi_square_sf(double statistic, int dof);

/// Pearson statistic of observed counts against a uniform expectation.
double chi_square_uniform(std::span<const long> counts);

}  // namespace nadd::stats
