#pragma once

#include <span>
#include <vector>

namespace nadd {

/// Ascending time discretization t_1 < ... < t_N with the identity noise
/// schedule sigma(t) = t. Immutable after construction.
class TimeGrid {
 public:
  TimeGrid(std::vector<double> times, double rho);

  std::span<const double> times() const { return times_; }
  int n_steps() const { return static_cast<int>(times_.size()); }
  double t_min() const { return times_.front(); }
  double t_max() const { return times_.back(); }
  double rho() const { return rho_; }
  double operator[](int i) const { return times_[static_cast<std::size_t>(i)]; }

  /// Noise level at time t. The schedule is the identity.
  static constexpr double sigma(double t) { return t; }

  /// Index i with times()[i] == t (relative tolerance 1e-12), or -1.
  int index_of(double t) const;
  /// Largest index i with times()[i] <= t, or -1 if t < t_min.
  int floor_index(double t) const;

 private:
  std::vector<double> times_;
  double rho_;
};

/// rho-power spacing between t_min and t_max, returned ascending.
/// Throws std::invalid_argument on n_steps < 2, t_min <= 0, t_min >= t_max
/// or rho < 1.
TimeGrid build_grid(int n_steps, double t_min, double t_max, double rho);

/// Smallest Delta with t_{i+1} - t_i <= Delta * T / N for every gap.
double gap_bound(const TimeGrid& grid);

}  // namespace nadd
