#pragma once

#include <cstdint>
#include <vector>

#include "nadd/types.hpp"

namespace nadd {

struct MixtureComponent {
  double weight = 1.0;
  Sample mean;
  /// Per-axis variances. A component whose variances are all zero is a point
  /// mass; it is usable by the score, denoiser and oracle as long as sigma > 0.
  Sample variance;
};

/// Diagonal-covariance Gaussian mixture. Weights must sum to one within 1e-12.
class GaussianMixture {
 public:
  explicit GaussianMixture(std::vector<MixtureComponent> components);

  int dim() const { return dim_; }
  const std::vector<MixtureComponent>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }

  /// log p_sigma(x), where p_sigma is the data density convolved with N(0, sigma^2 I).
  double log_density(const Sample& x, double sigma) const;

  static GaussianMixture isotropic(const Sample& mean, double variance);
  /// Equal-weight 1-D modes at -1 and +1 with the given per-mode variance.
  static GaussianMixture bimodal(double variance);

 private:
  std::vector<MixtureComponent> components_;
  int dim_;
};

/// Mixture whose components carry class labels.
struct LabeledMixture {
  GaussianMixture mixture;
  std::vector<int> labels;

  LabeledMixture(GaussianMixture mix, std::vector<int> component_labels);
  int num_classes() const;
};

/// Draw from a mixture and remember which component produced the draw.
struct LabeledDraw {
  Sample x;
  std::size_t component = 0;
};

LabeledDraw sample_one(const GaussianMixture& mix, Rng& rng);

/// `count` i.i.d. draws; the sequence depends only on `seed`.
std::vector<Sample> sample(const GaussianMixture& mix, std::uint64_t seed, int count);

/// grad_x log p_sigma(x). Throws std::domain_error when sigma == 0 and a point
/// mass is present (the density is not differentiable there).
Sample score(const GaussianMixture& mix, const Sample& x, double sigma);

/// Posterior mean E[x_0 | x_sigma = x] = x + sigma^2 score(x, sigma).
Sample exact_denoiser(const GaussianMixture& mix, const Sample& x, double sigma);

/// Jacobian of exact_denoiser with respect to x: I + sigma^2 * Hessian(log p_sigma).
Matrix exact_denoiser_jacobian(const GaussianMixture& mix, const Sample& x, double sigma);

/// Posterior mean by trapezoidal integration of x_0 p(x_0) N(x; x_0, sigma^2)
/// over a box spanning +-8 combined standard deviations around the component
/// means. Point masses contribute as atoms. Brute force; dim <= 2 only.
/// Throws std::invalid_argument for dim > 2 or grid_points < 1000.
Sample quadrature_oracle(const GaussianMixture& mix, const Sample& x, double sigma, int grid_points);

/// Per-class log density log sum_{k in c} w_k N(x; mu_k, diag(s_k^2 + sigma^2)).
std::vector<double> class_log_densities(const LabeledMixture& lmix, const Sample& x, double sigma = 0.0);

/// Argmax of class density times prior; ties go to the lowest class index.
int bayes_classifier(const LabeledMixture& lmix, const Sample& x);

}  // namespace nadd
