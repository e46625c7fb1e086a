#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "nadd/denoiser.hpp"

using namespace nadd;

TEST_CASE("preconditioning identities") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(std::log(0.002), std::log(80.0));
  const Preconditioning pre{0.5};
  for (int i = 0; i < 50; ++i) {
    const double s = std::exp(u(rng));
    const double sd2 = 0.25;
    // Unit-variance network input and the skip/out split.
    CHECK(std::abs(pre.c_in(s) * pre.c_in(s) * (s * s + sd2) - 1.0) < 1e-12);
    CHECK(std::abs(pre.c_skip(s) + pre.c_out(s) * pre.c_out(s) / sd2 - 1.0) < 1e-12);
    CHECK(std::abs(pre.c_noise(s) - std::log(s) / 4) < 1e-15);
  }
  CHECK(pre.c_skip(1e-9) == doctest::Approx(1.0));
  CHECK(pre.c_out(1e-9) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("learned denoiser basics") {
  MiniNetwork net({3, 8, 2}, 11);
  CHECK(net.parameter_count() == 3 * 8 + 8 + 8 * 2 + 2);
  const Denoiser d = Denoiser::learned(net, Preconditioning{0.5});
  CHECK(d.kind() == Denoiser::Kind::learned);
  CHECK(d.dim() == 2);
  Sample x(2);
  x << 0.4, -1.1;
  CHECK(d.evaluate(x, 0.0) == x);
  CHECK(d.jacobian(x, 0.0).isIdentity());
  CHECK_THROWS_AS(d.evaluate(x, -1.0), std::invalid_argument);

  SUBCASE("input Jacobian matches finite differences") {
    const double sigma = 0.7;
    const Matrix jac = d.jacobian(x, sigma);
    for (int j = 0; j < 2; ++j) {
      Sample a = x, b = x;
      a[j] += 1e-6;
      b[j] -= 1e-6;
      const Sample fd = (d.evaluate(a, sigma) - d.evaluate(b, sigma)) / 2e-6;
      CHECK((fd - jac.col(j)).norm() < 1e-7);
    }
  }
}

TEST_CASE("loss gradient matches finite differences") {
  const auto mix = GaussianMixture::bimodal(0.05);
  MiniNetwork net({2, 16, 16, 1}, 3);
  const Preconditioning pre{0.5};
  Rng rng(5);
  const auto batch = TrainingBatch::draw(mix, 0.002, 16.0, 32, rng);
  Eigen::VectorXd grad;
  const double loss = denoising_loss(net, pre, batch, &grad);
  REQUIRE(std::isfinite(loss));
  const Eigen::VectorXd params = net.parameters();
  REQUIRE(grad.size() == params.size());
  std::mt19937_64 pick(9);
  std::uniform_int_distribution<Eigen::Index> idx(0, params.size() - 1);
  const double h = 1e-5;
  for (int k = 0; k < 10; ++k) {
    const Eigen::Index i = idx(pick);
    Eigen::VectorXd p = params;
    p[i] += h;
    net.set_parameters(p);
    const double up = denoising_loss(net, pre, batch);
    p[i] -= 2 * h;
    net.set_parameters(p);
    const double down = denoising_loss(net, pre, batch);
    const double fd = (up - down) / (2 * h);
    CHECK(std::abs(fd - grad[i]) <= 1e-3 * std::max(std::abs(grad[i]), 1e-6) + 1e-9);
  }
}

TEST_CASE("skip-only loss of a point mass") {
  // With F == 0, D = c_skip (x0 + s n), so the error is (c_skip - 1) x0 + c_skip s n.
  const auto mix = GaussianMixture::isotropic(Sample::Constant(1, 0.0), 0.0);
  Rng rng(2);
  const auto batch = TrainingBatch::draw(mix, 0.1, 10.0, 16, rng);
  const Preconditioning pre{0.5};
  double expect = 0;
  for (std::size_t i = 0; i < batch.sigma.size(); ++i) {
    const double e = pre.c_skip(batch.sigma[i]) * batch.sigma[i] * batch.noise[i][0];
    expect += e * e;
  }
  expect /= static_cast<double>(batch.sigma.size());
  CHECK(skip_only_loss(pre, batch) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("training") {
  const TimeGrid grid = build_grid(29, 0.002, 16.0, 7.0);
  CHECK_THROWS_AS(train(GaussianMixture::bimodal(0.05), grid, NetworkSpec{}, 0, 1), std::invalid_argument);

  SUBCASE("point mass beats the skip-only model") {
    const auto mix = GaussianMixture::isotropic(Sample::Constant(1, 0.8), 0.0);
    const auto r = train(mix, grid, NetworkSpec{{16}, 0.02, 32, 0.5}, 500, 4);
    CHECK(r.final_loss < r.baseline_loss);
  }
  SUBCASE("standard normal posterior mean") {
    const auto mix = GaussianMixture::isotropic(Sample::Zero(1), 1.0);
    // sigma_data matches the data scale, as the preconditioning intends.
    const auto r = train(mix, grid, NetworkSpec{{32, 32}, 0.005, 64, 1.0}, 8000, 6);
    // E[x0 | x = 2] at sigma = 1 is 2 / (1 + 1).
    CHECK(std::abs(r.denoiser.evaluate(Sample::Constant(1, 2.0), 1.0)[0] - 1.0) < 0.05);
    // No loss comparison here: with sigma_data = 1 the skip-only model is already optimal.
  }
}

TEST_CASE("save and load round trip") {
  MiniNetwork net({2, 5, 1}, 21);
  const auto path = std::filesystem::temp_directory_path() / "nadd_test_network.bin";
  net.save(path, 0.7);
  const auto [back, sd] = MiniNetwork::load(path);
  CHECK(sd == 0.7);
  CHECK(back.widths() == net.widths());
  CHECK(back.parameters() == net.parameters());
  std::filesystem::remove(path);
  CHECK_THROWS(MiniNetwork::load(path));
}
