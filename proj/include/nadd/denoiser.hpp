#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <variant>
#include <vector>

#include "nadd/distributions.hpp"
#include "nadd/schedule.hpp"
#include "nadd/types.hpp"

namespace nadd {

/// EDM input/output scalings around the raw network F.
struct Preconditioning {
  double sigma_data = 0.5;

  double c_skip(double sigma) const { return sigma_data * sigma_data / (sigma * sigma + sigma_data * sigma_data); }
  double c_out(double sigma) const {
    return sigma * sigma_data / std::sqrt(sigma * sigma + sigma_data * sigma_data);
  }
  double c_in(double sigma) const { return 1.0 / std::sqrt(sigma * sigma + sigma_data * sigma_data); }
  double c_noise(double sigma) const { return 0.25 * std::log(sigma); }
};

/// Small tanh MLP. Input is (c_in * x, c_noise); output has the sample dimension.
class MiniNetwork {
 public:
  /// widths = {input, hidden..., output}.
  MiniNetwork(std::vector<int> widths, std::uint64_t seed);

  const std::vector<int>& widths() const { return widths_; }
  std::uint64_t seed() const { return seed_; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  Eigen::Index parameter_count() const;

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  /// d output / d input.
  Matrix input_jacobian(const Eigen::VectorXd& input) const;
  /// Adds (d output / d params)^T * upstream into `grad` (flat layout).
  void accumulate_gradient(const Eigen::VectorXd& input, const Eigen::VectorXd& upstream,
                           Eigen::VectorXd& grad) const;

  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  void save(const std::filesystem::path& path, double sigma_data) const;
  /// Returns the network and the stored sigma_data.
  static std::pair<MiniNetwork, double> load(const std::filesystem::path& path);

 private:
  std::vector<int> widths_;
  std::uint64_t seed_;
  std::vector<Matrix> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

/// D_theta. Either the closed-form mixture posterior mean or a preconditioned
/// MiniNetwork. Cheap to copy; the payload is shared and immutable.
class Denoiser {
 public:
  enum class Kind { exact, learned };

  static Denoiser exact(GaussianMixture mixture);
  static Denoiser learned(MiniNetwork network, Preconditioning precond);

  Kind kind() const;
  int dim() const;
  Sample evaluate(const Sample& x, double sigma) const;
  Matrix jacobian(const Sample& x, double sigma) const;

  const GaussianMixture* mixture() const;
  const MiniNetwork* network() const;
  const Preconditioning* preconditioning() const;

 private:
  struct Learned {
    MiniNetwork network;
    Preconditioning precond;
  };
  using Payload = std::variant<GaussianMixture, Learned>;
  explicit Denoiser(std::shared_ptr<const Payload> payload) : payload_(std::move(payload)) {}
  std::shared_ptr<const Payload> payload_;
};

struct NetworkSpec {
  std::vector<int> hidden{32, 32};
  double learning_rate = 0.02;
  int batch_size = 64;
  double sigma_data = 0.5;
};

class TrainingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One fixed minibatch of the denoising objective.
struct TrainingBatch {
  std::vector<Sample> clean;
  std::vector<Sample> noise;  // standard normal
  std::vector<double> sigma;

  static TrainingBatch draw(const GaussianMixture& mix, double t_min, double t_max, int size, Rng& rng);
};

/// Mean over the batch of ||D(x0 + sigma n; sigma) - x0||^2 and its gradient
/// with respect to the network parameters.
double denoising_loss(const MiniNetwork& net, const Preconditioning& pre, const TrainingBatch& batch,
                      Eigen::VectorXd* gradient = nullptr);

/// Loss of the skip-only model (F == 0) on the same batch.
double skip_only_loss(const Preconditioning& pre, const TrainingBatch& batch);

struct TrainResult {
  Denoiser denoiser;
  double final_loss;     // held-out batch
  double baseline_loss;  // skip-only model on the same held-out batch
};

/// Plain minibatch SGD on the denoising objective with sigma drawn
/// log-uniformly over [grid.t_min(), grid.t_max()].
/// Throws std::invalid_argument for steps < 1 and TrainingFailure on a NaN loss.
TrainResult train(const GaussianMixture& mix, const TimeGrid& grid, const NetworkSpec& spec, int steps,
                  std::uint64_t seed);

}  // namespace nadd
