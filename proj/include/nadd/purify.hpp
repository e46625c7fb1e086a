#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nadd/schedule.hpp"
#include "nadd/solver.hpp"
#include "nadd/types.hpp"

namespace nadd {

/// How the churned state enters the reverse step.
///  - karras: the step starts from the inflated state at level t_hat and
///    covers t_hat -> t_i (noise is actually added to the trajectory).
///  - literal: the slope is evaluated at the inflated state, but the step
///    starts from the pre-inflation state and covers t_{i+1} -> t_i.
enum class ChurnStep { karras, literal };

/// Purification knobs. Defaults are the reference l_inf settings; s_noise = 1
/// and s_max = "inf" (largest double).
struct NaddConfig {
  double t_prime = 16.0;   // forward noise level sigma_{t'}
  double t_stop = 0.585;   // correction cutoff; steps landing at t <= t_stop are uncorrected
  double beta = 0.03;      // power-law schedule exponent
  double kappa_min = 0.75;
  double kappa_max = 1.0;
  double s_churn = 2.0;
  double s_min = 0.0;
  double s_max = std::numeric_limits<double>::max();
  double s_noise = 1.0;
  bool kappa_scale_by_dim = false;        // multiply both radii by sqrt(d)
  std::optional<double> constant_weight;  // replaces the power-law weight on corrected steps
  ChurnStep churn_step = ChurnStep::karras;

  /// Human-readable invariant violations (empty when valid). With a grid the
  /// time knobs are also checked against its range.
  std::vector<std::string> violations(const TimeGrid* grid = nullptr) const;
  /// Throws std::invalid_argument listing every violation.
  void validate(const TimeGrid& grid) const;

  /// Ring radii after the optional sqrt(d) scaling.
  std::pair<double, double> ring_radii(int dim) const;
};

struct TimedState {
  double t;
  Sample x;
};

struct ForwardPath {
  Sample noisy;
  std::vector<TimedState> path;  // starts at (t_1, x)
};

/// Stepwise forward diffusion from t_1 up to t_prime, which must be a grid time.
ForwardPath forward_noise(const Sample& x, const TimeGrid& grid, double t_prime, Rng& rng);
/// One-shot equivalent: x + N(0, (t_prime^2 - t_1^2) I).
Sample forward_noise_closed_form(const Sample& x, const TimeGrid& grid, double t_prime, Rng& rng);

struct RingTarget {
  Sample base;
  Sample offset;
  Sample target;
  double radius;
};

/// base + r v/|v| with v ~ N(0, I), r ~ U[kappa_min, kappa_max]. The offset norm
/// is guaranteed to lie in [kappa_min, kappa_max].
RingTarget make_ring_target(const Sample& x, double kappa_min, double kappa_max, Rng& rng);

/// ((t - t_1) / t_N)^beta above the cutoff, zero at or below it.
double correction_weight(double t, const TimeGrid& grid, double t_stop, double beta);

/// Slope whose full step from x_cur over (t_lo - t_hi) lands on the ring target.
Sample correction_slope(const RingTarget& target, const Sample& x_cur, double t_lo, double t_hi);

/// Raises the noise level of x from t to t_hat = t (1 + gamma) by adding
/// sqrt(t_hat^2 - t^2) * z, z ~ N(0, s_noise^2 I). gamma == 0 draws nothing.
std::pair<Sample, double> stochastic_inflate(const Sample& x, double t, double gamma, double s_noise, Rng& rng);

/// min(s_churn / n_steps, sqrt(2) - 1) inside [s_min, s_max], zero outside.
double gamma_schedule(double t, int n_steps, double s_churn, double s_min, double s_max);

struct Trajectory {
  std::vector<TimedState> forward;
  std::vector<TimedState> reverse;  // starts at the forward endpoint, ends at t_1
  Sample purified;
  RingTarget ring;
  std::vector<double> weights_used;  // one per reverse step
  std::vector<double> gammas_used;

  /// Reverse state produced by the last corrected step (the smallest reverse
  /// time above t_stop); the final state when every step is corrected.
  const Sample& state_at_cutoff(double t_stop) const;
};

/// The full noise-amplified purification: forward noising to t_prime (snapped
/// down onto the grid), ring target around the clean input, then the reverse
/// pass with churn, ring-proximity correction above t_stop and plain solver
/// steps below it. Returns the state at t_1.
Trajectory purify(const Sample& x, const NaddConfig& cfg, const TimeGrid& grid, const UpdateFn& update, Rng& rng);

/// Same as purify, also returning d(purified)/dx with every random draw held fixed.
Trajectory purify(const Sample& x, const NaddConfig& cfg, const TimeGrid& grid, const UpdateFn& update, Rng& rng,
                  Matrix& jacobian);

/// Bundles everything a stochastic defense needs.
class NaddPurifier {
 public:
  NaddPurifier(NaddConfig cfg, TimeGrid grid, UpdateFn update);

  const NaddConfig& config() const { return cfg_; }
  const TimeGrid& grid() const { return grid_; }
  const UpdateFn& update() const { return update_; }

  Sample operator()(const Sample& x, Rng& rng) const;
  Sample operator()(const Sample& x, Rng& rng, Matrix& jacobian) const;

 private:
  NaddConfig cfg_;
  TimeGrid grid_;
  UpdateFn update_;
};

}  // namespace nadd
