#include "nadd/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nadd {

TimeGrid::TimeGrid(std::vector<double> times, double rho) : times_(std::move(times)), rho_(rho) {
  if (times_.size() < 2) throw std::invalid_argument("time grid needs at least two points");
  if (times_.front() <= 0.0) throw std::invalid_argument("time grid must start above zero");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      throw std::invalid_argument("time grid is not strictly increasing at index " + std::to_string(i));
    }
  }
}

int TimeGrid::index_of(double t) const {
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (std::abs(times_[i] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return static_cast<int>(i);
  }
  return -1;
}

int TimeGrid::floor_index(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  return static_cast<int>(it - times_.begin()) - 1;
}

TimeGrid build_grid(int n_steps, double t_min, double t_max, double rho) {
  if (n_steps < 2) throw std::invalid_argument("build_grid: n_steps must be >= 2");
  if (!(t_min > 0.0)) throw std::invalid_argument("build_grid: t_min must be positive");
  if (!(t_max > t_min)) throw std::invalid_argument("build_grid: t_max must exceed t_min");
  if (!(rho >= 1.0)) throw std::invalid_argument("build_grid: rho must be >= 1");

  const double lo = std::pow(t_min, 1.0 / rho);
  const double hi = std::pow(t_max, 1.0 / rho);
  std::vector<double> times(static_cast<std::size_t>(n_steps));
  // Index j counts down from t_max; stored ascending.
  for (int j = 0; j < n_steps; ++j) {
    const double frac = static_cast<double>(j) / (n_steps - 1);
    times[static_cast<std::size_t>(n_steps - 1 - j)] = std::pow(hi + frac * (lo - hi), rho);
  }
  // Pin the endpoints against pow round-off.
  times.front() = t_min;
  times.back() = t_max;
  return TimeGrid(std::move(times), rho);
}

double gap_bound(const TimeGrid& grid) {
  const auto t = grid.times();
  double max_gap = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) max_gap = std::max(max_gap, t[i] - t[i - 1]);
  return max_gap * grid.n_steps() / grid.t_max();
}

}  // namespace nadd
