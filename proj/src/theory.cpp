#include "nadd/theory.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "nadd/stats.hpp"

namespace nadd {

namespace {

void require_valid(const TheoremParams& p) {
  const auto v = p.violations();
  if (v.empty()) return;
  std::ostringstream msg;
  msg << "invalid theorem parameters:";
  for (const auto& s : v) msg << " " << s << ";";
  throw std::invalid_argument(msg.str());
}

void require_exact(const UpdateFn& update) {
  if (update.denoiser().kind() != Denoiser::Kind::exact) {
    throw std::invalid_argument("theorem checks require the exact mixture denoiser");
  }
}

ProbabilityEstimate make_estimate(int successes, int trials) {
  const auto [lo, hi] = stats::wilson_interval(successes, trials);
  return {successes, trials, static_cast<double>(successes) / trials, lo, hi};
}

}  // namespace

TheoremParams TheoremParams::from_grid(const TimeGrid& grid, double delta_star, double kappa_max, double kappa_min) {
  return {grid.n_steps(), grid.t_max(), gap_bound(grid), delta_star, kappa_max, kappa_min};
}

std::vector<std::string> TheoremParams::violations() const {
  std::vector<std::string> out;
  if (n_steps < 1) out.push_back("theorem.n_steps: must be >= 1");
  if (!(horizon > 0.0)) out.push_back("theorem.horizon: must be > 0");
  if (!(gap_constant > 0.0)) out.push_back("theorem.gap_constant: must be > 0");
  if (!(delta_star > 0.0 && delta_star < 1.0)) out.push_back("theorem.delta_star: must lie in (0, 1)");
  if (!(kappa_max > 0.0)) out.push_back("theorem.kappa_max: must be > 0");
  if (!(kappa_min >= 0.0)) out.push_back("theorem.kappa_min: must be >= 0");
  return out;
}

WeightBound weight_lower_bound(const TheoremParams& p) {
  require_valid(p);
  const double lambda = std::sqrt(std::log(2.0 * p.n_steps / p.delta_star));
  const double raw = 1.0 - p.kappa_max / (2.0 * lambda * std::sqrt(2.0 * p.gap_constant) * p.horizon);
  if (raw < 0.0) return {0.0, raw, true};
  return {std::min(raw, std::nextafter(1.0, 0.0)), raw, false};
}

double kappa_min_threshold(int n_steps) {
  if (n_steps < 1) throw std::invalid_argument("kappa_min_threshold: n_steps must be >= 1");
  return 1.0 / (2.0 * std::sqrt(2.0 * std::numbers::pi) * n_steps);
}

RecursionTrace run_recursion(const TimeGrid& grid, std::span<const double> weights, double lambda_scale) {
  const int n = grid.n_steps();
  if (static_cast<int>(weights.size()) != n) throw std::invalid_argument("run_recursion: need one weight per step");
  std::vector<double> tau{0.0};
  for (double t : grid.times()) tau.push_back(t);

  RecursionTrace trace;
  trace.steps.resize(static_cast<std::size_t>(n));
  double eps = 0.0;
  double delta = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    const double lo = tau[static_cast<std::size_t>(i)];
    const double hi = tau[static_cast<std::size_t>(i) + 1];
    const double var = hi * hi - lo * lo;
    const double lam = 2.0 * lambda_scale * std::sqrt(var);
    const double w = weights[static_cast<std::size_t>(i)];
    eps = (eps + lam) * (1.0 - w);
    delta = delta + 2.0 * std::exp(-lam * lam / (4.0 * var));
    trace.steps[static_cast<std::size_t>(i)] = {lo, hi, w, lam, eps, delta};
  }
  trace.epsilon0 = eps;
  trace.delta0 = delta;
  trace.closed_form_delta0 = 2.0 * n * std::exp(-lambda_scale * lambda_scale);
  return trace;
}

UpperBoundCheck monte_carlo_upper(const Sample& x, const NaddConfig& cfg, const TimeGrid& grid,
                                  const UpdateFn& update, const TheoremParams& p, int trials, std::uint64_t seed) {
  if (trials < 100) throw std::invalid_argument("monte_carlo_upper: need at least 100 trials");
  require_exact(update);
  UpperBoundCheck out;
  out.bound = weight_lower_bound(p);
  out.required = 1.0 - p.delta_star;
  int hits = 0;
  double cut_sum = 0.0;
  double final_sum = 0.0;
  for (int i = 0; i < trials; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto traj = purify(x, cfg, grid, update, rng);
    const double dist = (x - traj.state_at_cutoff(cfg.t_stop)).norm();
    hits += dist <= p.kappa_max;
    cut_sum += dist;
    final_sum += (x - traj.purified).norm();
  }
  out.estimate = make_estimate(hits, trials);
  out.mean_cutoff_distance = cut_sum / trials;
  out.mean_final_distance = final_sum / trials;
  out.pass = out.estimate.wilson_lo >= out.required;
  return out;
}

LowerBoundCheck monte_carlo_lower(const Sample& x, const NaddConfig& cfg, const TimeGrid& grid,
                                  const UpdateFn& update, const TheoremParams& p, int trials, int meta_trials,
                                  std::uint64_t seed) {
  if (trials < 100) throw std::invalid_argument("monte_carlo_lower: need at least 100 trials");
  if (meta_trials < 1) throw std::invalid_argument("monte_carlo_lower: need at least one meta-trial");
  require_exact(update);
  require_valid(p);
  LowerBoundCheck out;
  out.threshold = kappa_min_threshold(p.n_steps);
  if (!(p.kappa_min < out.threshold)) {
    throw std::invalid_argument("monte_carlo_lower: kappa_min must lie below 1/(2 sqrt(2 pi) N)");
  }
  auto escaped = [&](Rng& rng) {
    const auto traj = purify(x, cfg, grid, update, rng);
    return (x - traj.state_at_cutoff(cfg.t_stop)).norm() >= p.kappa_min;
  };
  int hits = 0;
  for (int i = 0; i < trials; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    hits += escaped(rng);
  }
  out.estimate = make_estimate(hits, trials);

  // First-success counts use a separate stream family.
  const std::uint64_t meta_seed = derive_seed(seed, 0xFEEDULL);
  const int cap = 100 * p.n_steps;
  double total_runs = 0.0;
  for (int m = 0; m < meta_trials; ++m) {
    Rng rng(derive_seed(meta_seed, static_cast<std::uint64_t>(m)));
    int runs = 1;
    while (!escaped(rng) && runs < cap) ++runs;
    total_runs += runs;
  }
  out.meta_trials = meta_trials;
  out.mean_first_success = total_runs / meta_trials;
  out.probability_pass = out.estimate.wilson_lo >= out.threshold;
  out.runs_pass = out.mean_first_success <= 5.0 * p.n_steps;
  return out;
}

}  // namespace nadd
