#include "nadd/stats.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace nadd::stats {

std::pair<double, double> wilson_interval(int successes, int trials, double z) {
  if (trials <= 0 || successes < 0 || successes > trials) throw std::invalid_argument("wilson_interval: bad counts");
  const double n = trials;
  const double p = successes / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z / (1 + z2 / n) * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  // The edges are exactly 0 and 1 at the extremes; the formula leaves rounding dust there.
  const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
  return {lo, hi};
}

TwoProportionTest two_proportion_greater(int successes1, int trials1, int successes2, int trials2) {
  if (trials1 <= 0 || trials2 <= 0) throw std::invalid_argument("two_proportion_greater: empty sample");
  const double p1 = static_cast<double>(successes1) / trials1;
  const double p2 = static_cast<double>(successes2) / trials2;
  const double pooled = static_cast<double>(successes1 + successes2) / (trials1 + trials2);
  const double se = std::sqrt(pooled * (1 - pooled) * (1.0 / trials1 + 1.0 / trials2));
  double z = 0.0;
  if (se > 0.0) {
    z = (p1 - p2) / se;
  } else if (p1 != p2) {
    z = p1 > p2 ? INFINITY : -INFINITY;
  }
  const double p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  return {p1, p2, z, p_value};
}

double chi_square_sf(double statistic, int dof) {
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

double chi_square_uniform(std::span<const long> counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (long c : counts) stat += (c - expected) * (c - expected) / expected;
  return stat;
}

}  // namespace nadd::stats
