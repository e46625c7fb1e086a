#include "nadd/solver.hpp"

#include <stdexcept>

namespace nadd {

namespace {

void check_times(double t_hi, double t_lo) {
  if (!(t_hi > t_lo && t_lo >= 0.0)) throw std::invalid_argument("phi: need t_hi > t_lo >= 0");
}

}  // namespace

Sample UpdateFn::phi(const Sample& x, double t_hi, double t_lo) const {
  check_times(t_hi, t_lo);
  const Sample d1 = (x - denoiser_.evaluate(x, t_hi)) / t_hi;
  if (method_ == SolverMethod::euler || t_lo <= t_min_) return d1;
  const Sample x2 = x + (t_lo - t_hi) * d1;
  const Sample d2 = (x2 - denoiser_.evaluate(x2, t_lo)) / t_lo;
  return 0.5 * (d1 + d2);
}

Sample UpdateFn::phi(const Sample& x, double t_hi, double t_lo, Matrix& jacobian) const {
  check_times(t_hi, t_lo);
  const Eigen::Index d = x.size();
  const Matrix eye = Matrix::Identity(d, d);
  const Sample d1 = (x - denoiser_.evaluate(x, t_hi)) / t_hi;
  const Matrix j1 = (eye - denoiser_.jacobian(x, t_hi)) / t_hi;
  if (method_ == SolverMethod::euler || t_lo <= t_min_) {
    jacobian = j1;
    return d1;
  }
  const Sample x2 = x + (t_lo - t_hi) * d1;
  const Matrix jx2 = eye + (t_lo - t_hi) * j1;
  const Sample d2 = (x2 - denoiser_.evaluate(x2, t_lo)) / t_lo;
  const Matrix j2 = (eye - denoiser_.jacobian(x2, t_lo)) / t_lo * jx2;
  jacobian = 0.5 * (j1 + j2);
  return 0.5 * (d1 + d2);
}

Sample UpdateFn::reverse_step(const Sample& x, double t_hi, double t_lo) const {
  return x + (t_lo - t_hi) * phi(x, t_hi, t_lo);
}

}  // namespace nadd
