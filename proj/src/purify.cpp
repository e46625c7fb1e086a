#include "nadd/purify.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace nadd {

std::vector<std::string> NaddConfig::violations(const TimeGrid* grid) const {
  std::vector<std::string> out;
  if (!(t_stop >= 0.0)) out.push_back("nadd.sigma_t_stop: must be >= 0");
  if (!(t_stop < t_prime)) out.push_back("nadd.sigma_t_stop: must be < sigma_t_prime");
  if (!(t_prime > 0.0)) out.push_back("nadd.sigma_t_prime: must be > 0");
  if (grid && t_prime > grid->t_max() * (1.0 + 1e-12)) out.push_back("nadd.sigma_t_prime: exceeds grid t_max");
  if (grid && t_prime < grid->t_min()) out.push_back("nadd.sigma_t_prime: below grid t_min");
  if (!(beta >= 0.0 && beta <= 1.0)) out.push_back("nadd.beta: must lie in [0, 1]");
  if (!(kappa_min >= 0.0)) out.push_back("nadd.kappa_min: must be >= 0");
  if (!(kappa_min < kappa_max)) out.push_back("nadd.kappa_min: must be < kappa_max");
  if (!(s_churn >= 0.0)) out.push_back("nadd.s_churn: must be >= 0");
  if (!(s_noise > 0.0)) out.push_back("nadd.s_noise: must be > 0");
  if (!(s_min <= s_max)) out.push_back("nadd.s_min: must be <= s_max");
  if (constant_weight && !(*constant_weight >= 0.0 && *constant_weight <= 1.0)) {
    out.push_back("nadd.constant_weight: must lie in [0, 1]");
  }
  return out;
}

void NaddConfig::validate(const TimeGrid& grid) const {
  const auto v = violations(&grid);
  if (v.empty()) return;
  std::ostringstream msg;
  msg << "invalid NADD configuration:";
  for (const auto& s : v) msg << "\n  " << s;
  throw std::invalid_argument(msg.str());
}

std::pair<double, double> NaddConfig::ring_radii(int dim) const {
  const double scale = kappa_scale_by_dim ? std::sqrt(static_cast<double>(dim)) : 1.0;
  return {kappa_min * scale, kappa_max * scale};
}

ForwardPath forward_noise(const Sample& x, const TimeGrid& grid, double t_prime, Rng& rng) {
  const int k = grid.index_of(t_prime);
  if (k < 0) throw std::invalid_argument("forward_noise: t_prime is not a grid time");
  ForwardPath out;
  out.noisy = x;
  out.path.push_back({grid[0], x});
  for (int i = 1; i <= k; ++i) {
    const double std_step = std::sqrt(grid[i] * grid[i] - grid[i - 1] * grid[i - 1]);
    out.noisy += std_step * standard_normal(rng, x.size());
    out.path.push_back({grid[i], out.noisy});
  }
  return out;
}

Sample forward_noise_closed_form(const Sample& x, const TimeGrid& grid, double t_prime, Rng& rng) {
  if (grid.index_of(t_prime) < 0) throw std::invalid_argument("forward_noise: t_prime is not a grid time");
  const double t1 = grid.t_min();
  return x + std::sqrt(t_prime * t_prime - t1 * t1) * standard_normal(rng, x.size());
}

RingTarget make_ring_target(const Sample& x, double kappa_min, double kappa_max, Rng& rng) {
  if (!(kappa_min >= 0.0 && kappa_min <= kappa_max)) {
    throw std::invalid_argument("make_ring_target: need 0 <= kappa_min <= kappa_max");
  }
  Sample v = standard_normal(rng, x.size());
  while (v.norm() == 0.0) v = standard_normal(rng, x.size());
  std::uniform_real_distribution<double> uniform(kappa_min, kappa_max);
  const double r = kappa_min == kappa_max ? kappa_min : uniform(rng);
  Sample u = r * (v / v.norm());
  // Nudge by single ulps if rounding pushed the norm out of the ring.
  constexpr double kUlp = std::numeric_limits<double>::epsilon();
  for (int i = 0; i < 64 && u.norm() > kappa_max; ++i) u *= 1.0 - kUlp;
  for (int i = 0; i < 64 && u.norm() < kappa_min; ++i) u *= 1.0 + kUlp;
  return {x, u, x + u, r};
}

double correction_weight(double t, const TimeGrid& grid, double t_stop, double beta) {
  if (t <= t_stop) return 0.0;
  const double num = t - grid.t_min();
  if (num <= 0.0) return 0.0;
  return std::pow(num / grid.t_max(), beta);
}

Sample correction_slope(const RingTarget& target, const Sample& x_cur, double t_lo, double t_hi) {
  if (t_lo == t_hi) throw std::invalid_argument("correction_slope: zero step");
  return (target.target - x_cur) / (t_lo - t_hi);
}

std::pair<Sample, double> stochastic_inflate(const Sample& x, double t, double gamma, double s_noise, Rng& rng) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("stochastic_inflate: gamma must be >= 0");
  if (gamma == 0.0) return {x, t};
  const double t_hat = t * (1.0 + gamma);
  const double scale = std::sqrt(t_hat * t_hat - t * t) * s_noise;
  return {x + scale * standard_normal(rng, x.size()), t_hat};
}

double gamma_schedule(double t, int n_steps, double s_churn, double s_min, double s_max) {
  if (n_steps < 1) throw std::invalid_argument("gamma_schedule: n_steps must be >= 1");
  if (t < s_min || t > s_max) return 0.0;
  return std::min(s_churn / n_steps, std::numbers::sqrt2 - 1.0);
}

const Sample& Trajectory::state_at_cutoff(double t_stop) const {
  const TimedState* best = &reverse.front();
  for (const auto& s : reverse) {
    if (s.t > t_stop) best = &s;
  }
  return best->x;
}

namespace {

Trajectory run_purify(const Sample& x, const NaddConfig& cfg, const TimeGrid& grid, const UpdateFn& update, Rng& rng,
                      Matrix* jac) {
  if (!(cfg.t_stop >= 0.0 && cfg.t_stop < cfg.t_prime)) {
    throw std::invalid_argument("purify: need 0 <= t_stop < t_prime");
  }
  if (cfg.t_prime > grid.t_max() * (1.0 + 1e-12)) throw std::invalid_argument("purify: t_prime beyond grid");
  const int top = grid.floor_index(cfg.t_prime);
  if (top < 0) throw std::invalid_argument("purify: t_prime below grid t_min");
  const Eigen::Index d = x.size();
  const Matrix eye = Matrix::Identity(d, d);

  Trajectory traj;
  auto fwd = forward_noise(x, grid, grid[top], rng);
  traj.forward = std::move(fwd.path);

  const auto [kmin, kmax] = cfg.ring_radii(static_cast<int>(d));
  traj.ring = make_ring_target(x, kmin, kmax, rng);

  Sample cur = std::move(fwd.noisy);
  Matrix cur_jac;
  if (jac) cur_jac = eye;
  traj.reverse.push_back({grid[top], cur});

  for (int i = top - 1; i >= 0; --i) {
    const double t_hi = grid[i + 1];
    const double t_lo = grid[i];
    const double gamma = gamma_schedule(t_lo, grid.n_steps(), cfg.s_churn, cfg.s_min, cfg.s_max);
    auto [inflated, t_hat] = stochastic_inflate(cur, t_hi, gamma, cfg.s_noise, rng);

    // Start of the step and its time.
    const bool from_inflated = cfg.churn_step == ChurnStep::karras;
    const Sample& base = from_inflated ? inflated : cur;
    const double t_from = from_inflated ? t_hat : t_hi;
    const double h = t_lo - t_from;

    Matrix phi_jac;
    Sample slope = jac ? update.phi(inflated, from_inflated ? t_hat : t_hi, t_lo, phi_jac)
                       : update.phi(inflated, from_inflated ? t_hat : t_hi, t_lo);
    Matrix slope_jac;
    if (jac) slope_jac = phi_jac * cur_jac;

    double w = 0.0;
    if (cfg.t_stop < t_lo) {
      w = cfg.constant_weight.value_or(correction_weight(t_lo, grid, cfg.t_stop, cfg.beta));
      if (w != 0.0) {
        const Sample c = correction_slope(traj.ring, base, t_lo, t_from);
        slope = slope * (1.0 - w) + c * w;
        if (jac) slope_jac = slope_jac * (1.0 - w) + ((eye - cur_jac) / h) * w;
      }
    }

    cur = base + h * slope;
    if (jac) cur_jac = cur_jac + h * slope_jac;
    traj.weights_used.push_back(w);
    traj.gammas_used.push_back(gamma);
    traj.reverse.push_back({t_lo, cur});
  }
  traj.purified = cur;
  if (jac) *jac = std::move(cur_jac);
  return traj;
}

}  // namespace

Trajectory purify(const Sample& x, const NaddConfig& cfg, const TimeGrid& grid, const UpdateFn& update, Rng& rng) {
  return run_purify(x, cfg, grid, update, rng, nullptr);
}

Trajectory purify(const Sample& x, const NaddConfig& cfg, const TimeGrid& grid, const UpdateFn& update, Rng& rng,
                  Matrix& jacobian) {
  return run_purify(x, cfg, grid, update, rng, &jacobian);
}

NaddPurifier::NaddPurifier(NaddConfig cfg, TimeGrid grid, UpdateFn update)
    : cfg_(std::move(cfg)), grid_(std::move(grid)), update_(std::move(update)) {}

Sample NaddPurifier::operator()(const Sample& x, Rng& rng) const { return purify(x, cfg_, grid_, update_, rng).purified; }

Sample NaddPurifier::operator()(const Sample& x, Rng& rng, Matrix& jacobian) const {
  return purify(x, cfg_, grid_, update_, rng, jacobian).purified;
}

}  // namespace nadd
