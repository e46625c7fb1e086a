#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace nadd {

/// A point in R^d. Inputs, noisy states and purified outputs all share this type.
using Sample = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using Rng = std::mt19937_64;

/// splitmix64 finalizer over (master, index). Per-trial streams are derived
/// this way so serial and parallel runs see identical random numbers.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Standard-normal vector of length `dim`.
inline Sample standard_normal(Rng& rng, Eigen::Index dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Sample z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z[i] = normal(rng);
  return z;
}

}  // namespace nadd
