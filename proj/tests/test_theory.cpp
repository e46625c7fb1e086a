#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "nadd/theory.hpp"

using namespace nadd;

TEST_CASE("weight lower bound") {
  TheoremParams p;  // N = 10, T = 1, Delta = 1, delta* = 0.1, kappa_max = 1
  const double lambda = std::sqrt(std::log(200.0));
  const double expect = 1.0 - 1.0 / (2 * lambda * std::sqrt(2.0));
  const auto b = weight_lower_bound(p);
  CHECK(b.raw == doctest::Approx(expect).epsilon(1e-14));
  CHECK(b.value == doctest::Approx(0.8465).epsilon(1e-4));
  CHECK_FALSE(b.vacuous);

  SUBCASE("monotone in its inputs") {
    TheoremParams q = p;
    q.kappa_max = 2;
    CHECK(weight_lower_bound(q).raw < b.raw);
    q = p;
    q.n_steps = 100;
    CHECK(weight_lower_bound(q).raw > b.raw);
    q = p;
    q.horizon = 4;
    CHECK(weight_lower_bound(q).raw > b.raw);
    q = p;
    q.gap_constant = 3;
    CHECK(weight_lower_bound(q).raw > b.raw);
  }
  SUBCASE("vacuous when kappa_max is large") {
    TheoremParams q = p;
    q.kappa_max = 10;
    const auto v = weight_lower_bound(q);
    CHECK(v.vacuous);
    CHECK(v.value == 0.0);
    CHECK(v.raw < 0.0);
  }
  SUBCASE("clamped below one") {
    TheoremParams q = p;
    q.kappa_max = 1e-300;
    CHECK(weight_lower_bound(q).value < 1.0);
  }
  SUBCASE("invalid parameters") {
    TheoremParams q = p;
    q.delta_star = 1.0;
    CHECK_THROWS_AS(weight_lower_bound(q), std::invalid_argument);
    q = p;
    q.n_steps = 0;
    CHECK(q.violations().size() == 1);
  }
  SUBCASE("read off a grid") {
    const TimeGrid g = build_grid(10, 0.002, 16.0, 7.0);
    const auto q = TheoremParams::from_grid(g, 0.1, 1.0, 0.01);
    CHECK(q.n_steps == 10);
    CHECK(q.horizon == 16.0);
    CHECK(q.gap_constant == gap_bound(g));
  }
}

TEST_CASE("kappa_min threshold") {
  CHECK(kappa_min_threshold(1) == doctest::Approx(1.0 / (2 * std::sqrt(2 * std::numbers::pi))));
  CHECK(kappa_min_threshold(10) == doctest::Approx(0.0199471140));
  CHECK_THROWS_AS(kappa_min_threshold(0), std::invalid_argument);
}

TEST_CASE("recursion") {
  const TimeGrid g = build_grid(10, 0.002, 16.0, 7.0);
  const double lambda = std::sqrt(std::log(2.0 * 10 / 0.1));

  SUBCASE("full weights pin epsilon at zero") {
    const std::vector<double> w(10, 1.0);
    const auto r = run_recursion(g, w, lambda);
    CHECK(r.epsilon0 == 0.0);
  }
  SUBCASE("zero weights accumulate every lambda_i") {
    const std::vector<double> w(10, 0.0);
    const auto r = run_recursion(g, w, lambda);
    double sum = 0, prev = 0;
    for (int i = 0; i < 10; ++i) {
      const double hi = g[i], lo = i ? g[i - 1] : 0.0;
      sum += 2 * lambda * std::sqrt(hi * hi - lo * lo);
      CHECK(r.steps[i].t_hi == hi);
      CHECK(r.steps[i].t_lo == lo);
    }
    CHECK(r.epsilon0 == doctest::Approx(sum).epsilon(1e-13));
    for (int i = 9; i >= 0; --i) {
      CHECK(r.steps[i].delta >= prev);
      prev = r.steps[i].delta;
    }
  }
  SUBCASE("delta matches its closed form") {
    const std::vector<double> w(10, 0.5);
    const auto r = run_recursion(g, w, lambda);
    CHECK(r.delta0 == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.closed_form_delta0 == doctest::Approx(r.delta0).epsilon(1e-12));
    // One hand-unrolled step at the top.
    const double var = g[9] * g[9] - g[8] * g[8];
    CHECK(r.steps[9].epsilon == doctest::Approx(2 * lambda * std::sqrt(var) * 0.5));
  }
  CHECK_THROWS_AS(run_recursion(g, std::vector<double>(9, 1.0), lambda), std::invalid_argument);
}

TEST_CASE("Monte Carlo checks") {
  const TimeGrid g = build_grid(10, 0.002, 16.0, 7.0);
  const auto mix = GaussianMixture::isotropic(Sample::Zero(2), 1.0);
  const UpdateFn update(SolverMethod::euler, Denoiser::exact(mix), g.t_min());
  Sample x(2);
  x << 0.5, -0.3;
  const auto p = TheoremParams::from_grid(g, 0.1, 1.0, 0.01);

  NaddConfig cfg;
  cfg.kappa_min = 0.0;
  cfg.kappa_max = 0.0;
  cfg.s_churn = 0.0;
  cfg.constant_weight = weight_lower_bound(p).value;

  SUBCASE("weights at the bound keep the cutoff state close") {
    const auto up = monte_carlo_upper(x, cfg, g, update, p, 300, 1);
    CHECK(up.estimate.trials == 300);
    CHECK(up.pass);
    CHECK(up.required == doctest::Approx(0.9));
    CHECK(up.mean_cutoff_distance <= 1.0);
  }
  SUBCASE("full weight returns to the input") {
    NaddConfig c = cfg;
    c.constant_weight = 1.0;
    const auto up = monte_carlo_upper(x, c, g, update, p, 100, 2);
    CHECK(up.estimate.p == 1.0);
    CHECK(up.mean_cutoff_distance < 1e-12);
  }
  SUBCASE("weak weights break the bound") {
    NaddConfig c = cfg;
    c.constant_weight = 0.2;
    auto q = p;
    q.kappa_max = 0.1;
    CHECK_FALSE(monte_carlo_upper(x, c, g, update, q, 200, 3).pass);
  }
  SUBCASE("lower bound") {
    NaddConfig c = cfg;
    c.constant_weight = 0.9;
    const auto lo = monte_carlo_lower(x, c, g, update, p, 200, 50, 4);
    CHECK(lo.threshold == doctest::Approx(kappa_min_threshold(10)));
    CHECK(lo.pass());
    CHECK(lo.mean_first_success >= 1.0);
  }
  SUBCASE("argument checks") {
    CHECK_THROWS_AS(monte_carlo_upper(x, cfg, g, update, p, 99, 1), std::invalid_argument);
    auto bad = p;
    bad.kappa_min = 0.05;
    CHECK_THROWS_AS(monte_carlo_lower(x, cfg, g, update, bad, 200, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(monte_carlo_lower(x, cfg, g, update, p, 200, 0, 1), std::invalid_argument);
    MiniNetwork net({3, 4, 2}, 1);
    const UpdateFn learned(SolverMethod::euler, Denoiser::learned(net, Preconditioning{}), g.t_min());
    CHECK_THROWS_AS(monte_carlo_upper(x, cfg, g, learned, p, 100, 1), std::invalid_argument);
  }
}
