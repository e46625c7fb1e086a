#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "nadd/stats.hpp"

using namespace nadd::stats;

TEST_CASE("Wilson interval against the textbook formula") {
  const double z = kZ95;
  for (auto [s, n] : std::vector<std::pair<int, int>>{{0, 10}, {5, 10}, {10, 10}, {37, 500}, {9990, 10000}}) {
    const double p = static_cast<double>(s) / n;
    const double denom = 1 + z * z / n;
    const double center = (p + z * z / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4.0 * n * n)) / denom;
    const auto [lo, hi] = wilson_interval(s, n);
    CHECK(lo == doctest::Approx(center - half).epsilon(1e-12));
    CHECK(hi == doctest::Approx(center + half).epsilon(1e-12));
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
  }
}

TEST_CASE("Wilson interval is exact at the extremes") {
  CHECK(wilson_interval(0, 500).first == 0.0);
  CHECK(wilson_interval(500, 500).second == 1.0);
  CHECK(wilson_interval(0, 500).second == doctest::Approx(kZ95 * kZ95 / (500 + kZ95 * kZ95)));
}

TEST_CASE("two-proportion test against direct pooled computation") {
  const int s1 = 60, n1 = 100, s2 = 45, n2 = 100;
  const double p = (s1 + s2) / 200.0;
  const double z = (0.60 - 0.45) / std::sqrt(p * (1 - p) * (1.0 / n1 + 1.0 / n2));
  const auto t = two_proportion_greater(s1, n1, s2, n2);
  CHECK(t.z == doctest::Approx(z).epsilon(1e-12));
  CHECK(t.p_value == doctest::Approx(0.5 * std::erfc(z / std::sqrt(2.0))).epsilon(1e-12));
  CHECK(t.significant());
  CHECK_FALSE(two_proportion_greater(45, 100, 60, 100).significant());
}

TEST_CASE("chi-square tail") {
  // Two degrees of freedom: the survival function is exp(-x/2).
  for (double x : {0.5, 2.0, 9.21}) CHECK(chi_square_sf(x, 2) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-12));
  // One degree of freedom: P(Z^2 > x) = erfc(sqrt(x/2)).
  CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  const std::vector<long> flat{100, 100, 100, 100};
  CHECK(chi_square_uniform(flat) == 0.0);
  const std::vector<long> skew{110, 90};
  CHECK(chi_square_uniform(skew) == doctest::Approx(2.0).epsilon(1e-12));
}
