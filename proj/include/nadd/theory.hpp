#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nadd/purify.hpp"
#include "nadd/schedule.hpp"
#include "nadd/solver.hpp"

namespace nadd {

/// Constants entering the return-probability estimates.
struct TheoremParams {
  int n_steps = 10;
  double horizon = 1.0;       // T
  double gap_constant = 1.0;  // Delta
  double delta_star = 0.1;
  double kappa_max = 1.0;
  double kappa_min = 0.0;

  /// N, T and Delta read off the grid.
  static TheoremParams from_grid(const TimeGrid& grid, double delta_star, double kappa_max, double kappa_min);
  std::vector<std::string> violations() const;
};

struct WeightBound {
  double value;  // clamped to [0, 1)
  double raw;    // 1 - kappa_max / (2 sqrt(log(2N/delta*)) sqrt(2 Delta) T)
  bool vacuous;  // raw < 0: every weight satisfies it
};

/// Correction weight above which the upper-bound guarantee holds.
WeightBound weight_lower_bound(const TheoremParams& p);

/// 1 / (2 sqrt(2 pi) N).
double kappa_min_threshold(int n_steps);

/// Error/failure-probability recursion over the step times 0 = tau_0 < t_1 < ... < t_N:
///   eps_i = (eps_{i+1} + lambda_i)(1 - w_i),  delta_i = delta_{i+1} + 2 exp(-lambda_i^2 / (4 (tau_{i+1}^2 - tau_i^2)))
/// with lambda_i = 2 lambda sqrt(tau_{i+1}^2 - tau_i^2) and eps_N = delta_N = 0.
struct RecursionStep {
  double t_lo;
  double t_hi;
  double weight;
  double lambda;
  double epsilon;
  double delta;
};

struct RecursionTrace {
  std::vector<RecursionStep> steps;  // index i = step tau_i <- tau_{i+1}
  double epsilon0;
  double delta0;
  double closed_form_delta0;  // 2 N exp(-lambda^2)
};

/// Throws std::invalid_argument unless weights.size() == grid.n_steps().
RecursionTrace run_recursion(const TimeGrid& grid, std::span<const double> weights, double lambda_scale);

struct ProbabilityEstimate {
  int successes = 0;
  int trials = 0;
  double p = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
};

struct UpperBoundCheck {
  ProbabilityEstimate estimate;  // Pr[ ||x - x_cut|| <= kappa_max ]
  double required;               // 1 - delta*
  WeightBound bound;
  double mean_cutoff_distance;
  double mean_final_distance;  // after the uncorrected tail down to t_1
  bool pass;                   // wilson_lo >= required
};

struct LowerBoundCheck {
  ProbabilityEstimate estimate;  // Pr[ ||x - x_cut|| >= kappa_min ]
  double threshold;              // 1 / (2 sqrt(2 pi) N)
  double mean_first_success;     // runs until the first success, averaged
  int meta_trials;
  bool probability_pass;  // wilson_lo >= threshold
  bool runs_pass;         // mean_first_success <= 5 N
  bool pass() const { return probability_pass && runs_pass; }
};

/// Runs `trials` purifications of the fixed input x and measures the distance
/// to the reverse state where correction stops. The update function must use
/// the exact denoiser. Throws std::invalid_argument for trials < 100.
UpperBoundCheck monte_carlo_upper(const Sample& x, const NaddConfig& cfg, const TimeGrid& grid,
                                  const UpdateFn& update, const TheoremParams& p, int trials, std::uint64_t seed);

/// Requires p.kappa_min < kappa_min_threshold(p.n_steps).
LowerBoundCheck monte_carlo_lower(const Sample& x, const NaddConfig& cfg, const TimeGrid& grid,
                                  const UpdateFn& update, const TheoremParams& p, int trials, int meta_trials,
                                  std::uint64_t seed);

}  // namespace nadd
