#pragma once

#include "nadd/denoiser.hpp"
#include "nadd/types.hpp"

namespace nadd {

enum class SolverMethod { euler, heun };

/// Phi: the probability-flow slope used for one reverse step. Heun skips its
/// second evaluation when the step lands at or below t_min.
class UpdateFn {
 public:
  UpdateFn(SolverMethod method, Denoiser denoiser, double t_min = 0.0)
      : method_(method), denoiser_(std::move(denoiser)), t_min_(t_min) {}

  SolverMethod method() const { return method_; }
  const Denoiser& denoiser() const { return denoiser_; }
  double t_min() const { return t_min_; }

  /// Slope dx/dt for the step t_hi -> t_lo. Throws std::invalid_argument unless t_hi > t_lo >= 0.
  Sample phi(const Sample& x, double t_hi, double t_lo) const;
  /// Same slope and its Jacobian with respect to x.
  Sample phi(const Sample& x, double t_hi, double t_lo, Matrix& jacobian) const;

  /// x + (t_lo - t_hi) * phi(x, t_hi, t_lo).
  Sample reverse_step(const Sample& x, double t_hi, double t_lo) const;

 private:
  SolverMethod method_;
  Denoiser denoiser_;
  double t_min_;
};

}  // namespace nadd
