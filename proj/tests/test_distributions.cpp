#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "nadd/distributions.hpp"
#include "nadd/stats.hpp"

using namespace nadd;

namespace {

Sample vec(std::initializer_list<double> v) {
  Sample s(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) s[i++] = x;
  return s;
}

double normal_pdf(double x, double mean, double var) {
  return std::exp(-(x - mean) * (x - mean) / (2 * var)) / std::sqrt(2 * std::numbers::pi * var);
}

// Posterior mean of the equal-weight +-1 mixture by midpoint rule on a wide interval.
double bimodal_posterior_mean(double x, double sigma, double var) {
  const int n = 400000;
  const double lo = -6, hi = 6, h = (hi - lo) / n;
  double num = 0, den = 0;
  for (int i = 0; i < n; ++i) {
    const double x0 = lo + (i + 0.5) * h;
    const double prior = 0.5 * normal_pdf(x0, -1, var) + 0.5 * normal_pdf(x0, 1, var);
    const double like = normal_pdf(x, x0, sigma * sigma);
    num += x0 * prior * like;
    den += prior * like;
  }
  return num / den;
}

GaussianMixture random_mixture(int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2, 2), v(0.05, 1.0), w(0.2, 1.0);
  std::vector<MixtureComponent> comps;
  double total = 0;
  for (int k = 0; k < 3; ++k) {
    MixtureComponent c;
    c.weight = w(rng);
    total += c.weight;
    c.mean = Sample(dim);
    c.variance = Sample(dim);
    for (int j = 0; j < dim; ++j) {
      c.mean[j] = u(rng);
      c.variance[j] = v(rng);
    }
    comps.push_back(c);
  }
  for (auto& c : comps) c.weight /= total;
  // Renormalize the last weight so the sum is exactly representable as 1.
  double rest = 0;
  for (std::size_t k = 0; k + 1 < comps.size(); ++k) rest += comps[k].weight;
  comps.back().weight = 1.0 - rest;
  return GaussianMixture(comps);
}

}  // namespace

TEST_CASE("sampling") {
  SUBCASE("standard normal mean") {
    const auto mix = GaussianMixture::isotropic(Sample::Zero(2), 1.0);
    const int n = 100000;
    const auto xs = sample(mix, 42, n);
    Sample mean = Sample::Zero(2);
    for (const auto& x : xs) mean += x;
    mean /= n;
    CHECK(mean.cwiseAbs().maxCoeff() < 3.0 * 2 / std::sqrt(n));
  }
  SUBCASE("bimodal components are balanced") {
    const auto mix = GaussianMixture::bimodal(0.05);
    Rng rng(9);
    std::vector<long> counts(2, 0);
    for (int i = 0; i < 20000; ++i) ++counts[sample_one(mix, rng).component];
    CHECK(stats::chi_square_sf(stats::chi_square_uniform(counts), 1) > 0.01);
  }
  SUBCASE("zero-weight component is never drawn") {
    GaussianMixture mix({{1.0, vec({-1}), vec({0.1})}, {0.0, vec({1}), vec({0.1})}});
    Rng rng(3);
    for (int i = 0; i < 5000; ++i) CHECK(sample_one(mix, rng).component == 0);
  }
  SUBCASE("deterministic for a fixed seed") {
    const auto mix = GaussianMixture::bimodal(0.05);
    const auto a = sample(mix, 5, 50);
    const auto b = sample(mix, 5, 50);
    for (int i = 0; i < 50; ++i) CHECK(a[i] == b[i]);
    CHECK_THROWS_AS(sample(mix, 5, 0), std::invalid_argument);
  }
}

TEST_CASE("mixture validation") {
  CHECK_THROWS_AS(GaussianMixture({{0.5, vec({0}), vec({1})}}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({{1.0, vec({0}), vec({-1})}}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({{0.5, vec({0}), vec({1})}, {0.5, vec({0, 1}), vec({1, 1})}}),
                  std::invalid_argument);
}

TEST_CASE("score closed forms") {
  const Sample mu = vec({0.3, -1.2});
  const Sample x = vec({1.0, 0.5});
  SUBCASE("single Gaussian") {
    const auto mix = GaussianMixture::isotropic(mu, 0.4);
    const double sigma = 0.7;
    const Sample expect = (mu - x) / (0.4 + sigma * sigma);
    CHECK((score(mix, x, sigma) - expect).norm() < 1e-13);
  }
  SUBCASE("point mass") {
    const auto mix = GaussianMixture::isotropic(mu, 0.0);
    const double sigma = 1.3;
    CHECK((score(mix, x, sigma) - (mu - x) / (sigma * sigma)).norm() < 1e-13);
    CHECK_THROWS_AS(score(mix, x, 0.0), std::domain_error);
  }
  SUBCASE("bimodal symmetry") {
    const auto mix = GaussianMixture::bimodal(0.05);
    CHECK(std::abs(score(mix, vec({0.0}), 1.0)[0]) < 1e-15);
  }
}

TEST_CASE("score matches finite differences of the log density") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  for (int dim : {1, 2}) {
    const auto mix = random_mixture(dim, rng);
    for (double sigma : {0.0, 0.1, 1.0, 5.0}) {
      for (int probe = 0; probe < 10; ++probe) {
        Sample x(dim);
        for (int j = 0; j < dim; ++j) x[j] = nd(rng);
        const Sample s = score(mix, x, sigma);
        const double h = 1e-5;
        for (int j = 0; j < dim; ++j) {
          Sample a = x, b = x;
          a[j] += h;
          b[j] -= h;
          const double fd = (mix.log_density(a, sigma) - mix.log_density(b, sigma)) / (2 * h);
          CHECK(std::abs(fd - s[j]) <= 1e-4 * std::max(1.0, std::abs(s[j])));
        }
      }
    }
  }
}

TEST_CASE("denoiser identities") {
  SUBCASE("point mass returns the mass") {
    const Sample mu = vec({2.0, -1.0});
    const auto mix = GaussianMixture::isotropic(mu, 0.0);
    for (double sigma : {0.01, 1.0, 16.0}) CHECK((exact_denoiser(mix, vec({-3.0, 7.0}), sigma) - mu).norm() < 1e-12);
  }
  SUBCASE("Gaussian shrinkage") {
    const auto mix = GaussianMixture::isotropic(Sample::Zero(2), 0.5);
    const Sample x = vec({1.0, -2.0});
    CHECK((exact_denoiser(mix, x, 1.5) - x * 0.5 / (0.5 + 2.25)).norm() < 1e-14);
  }
  SUBCASE("sigma zero returns the input") {
    const auto mix = GaussianMixture::bimodal(0.05);
    const Sample x = vec({0.37});
    CHECK(exact_denoiser(mix, x, 0.0) == x);
  }
  SUBCASE("D(x) - x equals sigma^2 times the score") {
    std::mt19937_64 rng(4);
    const auto mix = random_mixture(2, rng);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 50; ++i) {
      const Sample x = vec({3 * nd(rng), 3 * nd(rng)});
      for (double sigma : {0.002, 0.5, 16.0}) {
        const Sample lhs = exact_denoiser(mix, x, sigma) - x;
        const Sample rhs = sigma * sigma * score(mix, x, sigma);
        CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, rhs.norm()));
      }
    }
  }
}

TEST_CASE("bimodal denoiser agrees with two independent integrations") {
  const auto mix = GaussianMixture::bimodal(0.05);
  const Sample x = vec({0.3});
  const double closed = exact_denoiser(mix, x, 0.5)[0];
  CHECK(std::abs(closed - quadrature_oracle(mix, x, 0.5, 2000)[0]) < 1e-8);
  CHECK(std::abs(closed - bimodal_posterior_mean(0.3, 0.5, 0.05)) < 1e-8);
}

TEST_CASE("quadrature oracle examples") {
  CHECK(std::abs(quadrature_oracle(GaussianMixture::isotropic(vec({1.0}), 0.0), vec({0.0}), 1.0, 1000)[0] - 1.0) <
        1e-6);
  CHECK(std::abs(quadrature_oracle(GaussianMixture::isotropic(vec({0.0}), 1.0), vec({2.0}), 1.0, 1000)[0] - 1.0) <
        1e-6);
  CHECK_THROWS_AS(quadrature_oracle(GaussianMixture::isotropic(Sample::Zero(3), 1.0), Sample::Zero(3), 1.0, 1000),
                  std::invalid_argument);
  CHECK_THROWS_AS(quadrature_oracle(GaussianMixture::bimodal(0.05), vec({0.0}), 1.0, 999), std::invalid_argument);
}

TEST_CASE("closed form matches the oracle on random probes") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> us(0.05, 3.0);
  for (int dim : {1, 2}) {
    const auto mix = random_mixture(dim, rng);
    for (int i = 0; i < 20; ++i) {
      Sample x(dim);
      for (int j = 0; j < dim; ++j) x[j] = 2 * nd(rng);
      const double sigma = us(rng);
      const Sample a = exact_denoiser(mix, x, sigma);
      const Sample b = quadrature_oracle(mix, x, sigma, 1000);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("denoiser Jacobian matches finite differences") {
  std::mt19937_64 rng(8);
  const auto mix = random_mixture(2, rng);
  const Sample x = vec({0.4, -0.7});
  for (double sigma : {0.05, 0.8, 4.0}) {
    const Matrix jac = exact_denoiser_jacobian(mix, x, sigma);
    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
      Sample a = x, b = x;
      a[j] += h;
      b[j] -= h;
      const Sample fd = (exact_denoiser(mix, a, sigma) - exact_denoiser(mix, b, sigma)) / (2 * h);
      CHECK((fd - jac.col(j)).norm() < 1e-6 * std::max(1.0, jac.norm()));
    }
  }
}

TEST_CASE("Bayes classifier") {
  const LabeledMixture lm(GaussianMixture::bimodal(0.05), {0, 1});
  CHECK(bayes_classifier(lm, vec({-0.7})) == 0);
  CHECK(bayes_classifier(lm, vec({0.7})) == 1);
  CHECK(bayes_classifier(lm, vec({0.0})) == 0);

  // Skewed priors move the boundary right of the midpoint.
  const LabeledMixture skew(GaussianMixture({{0.9, vec({-1}), vec({0.5})}, {0.1, vec({1}), vec({0.5})}}), {0, 1});
  const double x = 0.05;
  const double d0 = 0.9 * normal_pdf(x, -1, 0.5);
  const double d1 = 0.1 * normal_pdf(x, 1, 0.5);
  REQUIRE(d0 > d1);
  CHECK(bayes_classifier(skew, vec({x})) == 0);

  // Several components may share a label.
  const LabeledMixture multi(
      GaussianMixture({{0.25, vec({-2}), vec({0.1})}, {0.25, vec({2}), vec({0.1})}, {0.5, vec({0}), vec({0.1})}}),
      {1, 1, 0});
  CHECK(multi.num_classes() == 2);
  CHECK(bayes_classifier(multi, vec({1.9})) == 1);
  CHECK(bayes_classifier(multi, vec({0.1})) == 0);
}
