#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nadd/adversarial.hpp"
#include "nadd/denoiser.hpp"
#include "nadd/distributions.hpp"
#include "nadd/purify.hpp"
#include "nadd/schedule.hpp"
#include "nadd/solver.hpp"

namespace nadd {

struct ComponentSpec {
  double weight = 1.0;
  std::vector<double> mean;
  std::vector<double> variance;
  int label = 0;
};

struct GridSpec {
  int n_steps = 29;
  double t_min = 0.002;
  double t_max = 16.0;
  double rho = 7.0;
};

enum class DenoiserKind { exact, learned };

/// Classifier under attack: the data mixture's own Bayes rule when no
/// surrogate components are given.
struct ClassifierSpec {
  double temperature = 1.0;
  std::vector<ComponentSpec> surrogate;
};

struct TheoremSpec {
  double delta_star = 0.1;
  double kappa_max = 1.0;
  double kappa_min = 0.01;
  std::vector<double> probe{0.5, -0.3};
  int meta_trials = 200;
  double lower_weight = 0.9;
};

struct TrainingSpec {
  std::vector<int> hidden{32, 32};
  int steps = 4000;
  double learning_rate = 0.02;
  int batch_size = 64;
  double sigma_data = 0.5;
  int probe_points = 41;
  double probe_extent = 2.5;
  double max_gap = 0.05;
};

struct Fig1Spec {
  int saved_trajectories = 12;
  double flip_ceiling = 0.05;   // corrected flip rate must stay below
  double flip_floor = 0.25;     // uncorrected flip rate must exceed
};

struct ExperimentConfig {
  std::string experiment = "purify-demo";
  std::uint64_t seed = 20240611;
  int trials = 200;
  std::string output_dir;  // defaults to runs/<experiment>
  SolverMethod solver = SolverMethod::heun;
  DenoiserKind denoiser = DenoiserKind::exact;
  std::vector<ComponentSpec> mixture;
  GridSpec grid;
  NaddConfig nadd;
  AttackConfig attack;
  ClassifierSpec classifier;
  std::vector<double> sweep;
  TheoremSpec theorem;
  TrainingSpec training;
  Fig1Spec fig1;

  bool operator==(const ExperimentConfig&) const;
};

bool operator==(const ComponentSpec& a, const ComponentSpec& b);

/// Names accepted in the `experiment` field.
const std::vector<std::string>& experiment_names();

/// Parse failure with the position of the offending token (1-based).
class ConfigParseError : public std::runtime_error {
 public:
  ConfigParseError(const std::string& what, int line, int column)
      : std::runtime_error(what), line(line), column(column) {}
  int line;
  int column;
};

/// Reads YAML text. Unknown keys and type errors raise ConfigParseError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Canonical YAML form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// Every violated invariant as "field.path: message"; empty when valid.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

GaussianMixture build_mixture(const std::vector<ComponentSpec>& components);
LabeledMixture build_labeled(const std::vector<ComponentSpec>& components);
TimeGrid build_grid(const GridSpec& spec);

}  // namespace nadd
