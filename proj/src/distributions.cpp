#include "nadd/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace nadd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double e : v) s += std::exp(e - m);
  return m + std::log(s);
}

// log N(x; mean, diag(total_var)).
double log_gaussian(const Sample& x, const Sample& mean, const Sample& total_var) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = total_var[i];
    const double r = x[i] - mean[i];
    acc += r * r / v + std::log(2.0 * std::numbers::pi * v);
  }
  return -0.5 * acc;
}

// Responsibilities and per-component score terms (mu_k - x) / v_k.
struct PosteriorTerms {
  std::vector<double> resp;
  std::vector<Sample> pull;
};

PosteriorTerms posterior_terms(const GaussianMixture& mix, const Sample& x, double sigma) {
  if (x.size() != mix.dim()) throw std::invalid_argument("sample dimension does not match mixture");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  const double s2 = sigma * sigma;
  const auto& comps = mix.components();
  PosteriorTerms out;
  out.resp.resize(comps.size());
  out.pull.resize(comps.size());
  std::vector<double> logw(comps.size());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const Sample v = (comps[k].variance.array() + s2).matrix();
    if ((v.array() <= 0.0).any()) {
      throw std::domain_error("score undefined: point-mass component at sigma = 0");
    }
    logw[k] = comps[k].weight > 0.0 ? std::log(comps[k].weight) + log_gaussian(x, comps[k].mean, v) : kNegInf;
    out.pull[k] = ((comps[k].mean - x).array() / v.array()).matrix();
  }
  const double norm = log_sum_exp(logw);
  for (std::size_t k = 0; k < comps.size(); ++k) out.resp[k] = std::exp(logw[k] - norm);
  return out;
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> components) : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
  dim_ = static_cast<int>(components_.front().mean.size());
  if (dim_ < 1) throw std::invalid_argument("mixture dimension must be >= 1");
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.mean.size() != dim_ || c.variance.size() != dim_) {
      throw std::invalid_argument("mixture component dimensions disagree");
    }
    if (!(c.weight >= 0.0 && c.weight <= 1.0)) throw std::invalid_argument("mixture weight outside [0,1]");
    if ((c.variance.array() < 0.0).any() || !c.variance.allFinite()) {
      throw std::invalid_argument("mixture variances must be finite and non-negative");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture weights must sum to 1");
}

double GaussianMixture::log_density(const Sample& x, double sigma) const {
  std::vector<double> terms;
  terms.reserve(components_.size());
  for (const auto& c : components_) {
    if (c.weight <= 0.0) continue;
    const Sample v = (c.variance.array() + sigma * sigma).matrix();
    if ((v.array() <= 0.0).any()) throw std::domain_error("density undefined: point mass at sigma = 0");
    terms.push_back(std::log(c.weight) + log_gaussian(x, c.mean, v));
  }
  return log_sum_exp(terms);
}

GaussianMixture GaussianMixture::isotropic(const Sample& mean, double variance) {
  return GaussianMixture({MixtureComponent{1.0, mean, Sample::Constant(mean.size(), variance)}});
}

GaussianMixture GaussianMixture::bimodal(double variance) {
  return GaussianMixture({
      MixtureComponent{0.5, Sample::Constant(1, -1.0), Sample::Constant(1, variance)},
      MixtureComponent{0.5, Sample::Constant(1, 1.0), Sample::Constant(1, variance)},
  });
}

LabeledMixture::LabeledMixture(GaussianMixture mix, std::vector<int> component_labels)
    : mixture(std::move(mix)), labels(std::move(component_labels)) {
  if (labels.size() != mixture.size()) throw std::invalid_argument("one label per mixture component required");
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("class labels must be non-negative");
  }
}

int LabeledMixture::num_classes() const { return *std::max_element(labels.begin(), labels.end()) + 1; }

LabeledDraw sample_one(const GaussianMixture& mix, Rng& rng) {
  std::vector<double> w;
  for (const auto& c : mix.components()) w.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  const std::size_t k = pick(rng);
  const auto& c = mix.components()[k];
  Sample z = standard_normal(rng, mix.dim());
  return {c.mean + (c.variance.array().sqrt() * z.array()).matrix(), k};
}

std::vector<Sample> sample(const GaussianMixture& mix, std::uint64_t seed, int count) {
  if (count < 1) throw std::invalid_argument("sample: count must be >= 1");
  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(sample_one(mix, rng).x);
  return out;
}

Sample score(const GaussianMixture& mix, const Sample& x, double sigma) {
  const auto terms = posterior_terms(mix, x, sigma);
  Sample s = Sample::Zero(x.size());
  for (std::size_t k = 0; k < terms.resp.size(); ++k) s += terms.resp[k] * terms.pull[k];
  return s;
}

Sample exact_denoiser(const GaussianMixture& mix, const Sample& x, double sigma) {
  if (sigma == 0.0) {
    if (x.size() != mix.dim()) throw std::invalid_argument("sample dimension does not match mixture");
    return x;
  }
  return x + sigma * sigma * score(mix, x, sigma);
}

Matrix exact_denoiser_jacobian(const GaussianMixture& mix, const Sample& x, double sigma) {
  const Eigen::Index d = x.size();
  if (sigma == 0.0) return Matrix::Identity(d, d);
  const double s2 = sigma * sigma;
  const auto terms = posterior_terms(mix, x, sigma);
  Sample mean_pull = Sample::Zero(d);
  Matrix hess = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < terms.resp.size(); ++k) {
    const double r = terms.resp[k];
    if (r == 0.0) continue;
    const Sample v = (mix.components()[k].variance.array() + s2).matrix();
    hess.diagonal() -= r * v.cwiseInverse();
    hess += r * terms.pull[k] * terms.pull[k].transpose();
    mean_pull += r * terms.pull[k];
  }
  hess -= mean_pull * mean_pull.transpose();
  return Matrix::Identity(d, d) + s2 * hess;
}

Sample quadrature_oracle(const GaussianMixture& mix, const Sample& x, double sigma, int grid_points) {
  const int d = mix.dim();
  if (d > 2) throw std::invalid_argument("quadrature_oracle: dimension too large (max 2)");
  if (grid_points < 1000) throw std::invalid_argument("quadrature_oracle: grid_points must be >= 1000");
  if (x.size() != d) throw std::invalid_argument("sample dimension does not match mixture");
  if (sigma == 0.0) return x;

  const double s2 = sigma * sigma;
  const auto& comps = mix.components();

  // Box per axis: component means +- 8 combined standard deviations.
  double spread = 0.0;
  for (const auto& c : comps) spread = std::max(spread, std::sqrt(c.variance.maxCoeff() + s2));
  std::vector<std::vector<double>> nodes(static_cast<std::size_t>(d));
  std::vector<std::vector<double>> trap(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& c : comps) {
      lo = std::min(lo, c.mean[a] - 8.0 * spread);
      hi = std::max(hi, c.mean[a] + 8.0 * spread);
    }
    const double h = (hi - lo) / (grid_points - 1);
    auto& n = nodes[static_cast<std::size_t>(a)];
    auto& w = trap[static_cast<std::size_t>(a)];
    n.resize(static_cast<std::size_t>(grid_points));
    w.assign(static_cast<std::size_t>(grid_points), h);
    for (int g = 0; g < grid_points; ++g) n[static_cast<std::size_t>(g)] = lo + g * h;
    w.front() *= 0.5;
    w.back() *= 0.5;
  }

  // Each integrand term is a product over axes; tabulate per-axis log factors
  // of prior(x0) * likelihood(x | x0) for every continuous component, then sum
  // the full tensor-product grid.
  const std::size_t n = static_cast<std::size_t>(grid_points);
  std::vector<std::size_t> continuous;
  std::vector<std::size_t> atoms;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (comps[k].weight <= 0.0) continue;
    const bool all_zero = (comps[k].variance.array() == 0.0).all();
    const bool any_zero = (comps[k].variance.array() == 0.0).any();
    if (all_zero) {
      atoms.push_back(k);
    } else if (any_zero) {
      throw std::invalid_argument("quadrature_oracle: partially degenerate components unsupported");
    } else {
      continuous.push_back(k);
    }
  }

  // log factors [component][axis][node]
  std::vector<std::vector<std::vector<double>>> logf(continuous.size());
  double shift = kNegInf;
  std::vector<double> axis_shift(static_cast<std::size_t>(d), kNegInf);
  for (std::size_t ci = 0; ci < continuous.size(); ++ci) {
    const auto& c = comps[continuous[ci]];
    logf[ci].resize(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
      auto& lf = logf[ci][static_cast<std::size_t>(a)];
      lf.resize(n);
      const double v = c.variance[a];
      for (std::size_t g = 0; g < n; ++g) {
        const double x0 = nodes[static_cast<std::size_t>(a)][g];
        const double prior = -0.5 * ((x0 - c.mean[a]) * (x0 - c.mean[a]) / v + std::log(2.0 * std::numbers::pi * v));
        const double like = -0.5 * ((x[a] - x0) * (x[a] - x0) / s2 + std::log(2.0 * std::numbers::pi * s2));
        lf[g] = prior + like;
        if (a == 0) lf[g] += std::log(c.weight);
        axis_shift[static_cast<std::size_t>(a)] = std::max(axis_shift[static_cast<std::size_t>(a)], lf[g]);
      }
    }
  }
  std::vector<double> atom_log(atoms.size());
  for (std::size_t ai = 0; ai < atoms.size(); ++ai) {
    const auto& c = comps[atoms[ai]];
    double like = std::log(c.weight);
    for (int a = 0; a < d; ++a) {
      like += -0.5 * ((x[a] - c.mean[a]) * (x[a] - c.mean[a]) / s2 + std::log(2.0 * std::numbers::pi * s2));
    }
    atom_log[ai] = like;
    shift = std::max(shift, like);
  }
  double grid_shift = 0.0;
  for (double s : axis_shift) grid_shift += s;
  if (!continuous.empty()) shift = std::max(shift, grid_shift);

  double mass = 0.0;
  Sample moment = Sample::Zero(d);
  if (!continuous.empty()) {
    // Scaled linear factors, common per-axis shift so products stay consistent.
    const double rescale = std::exp(grid_shift - shift);
    for (std::size_t ci = 0; ci < continuous.size(); ++ci) {
      std::vector<std::vector<double>> f(static_cast<std::size_t>(d), std::vector<double>(n));
      for (int a = 0; a < d; ++a) {
        for (std::size_t g = 0; g < n; ++g) {
          f[static_cast<std::size_t>(a)][g] =
              std::exp(logf[ci][static_cast<std::size_t>(a)][g] - axis_shift[static_cast<std::size_t>(a)]);
        }
      }
      if (d == 1) {
        for (std::size_t g = 0; g < n; ++g) {
          const double v = trap[0][g] * f[0][g] * rescale;
          mass += v;
          moment[0] += v * nodes[0][g];
        }
      } else {
        for (std::size_t g0 = 0; g0 < n; ++g0) {
          for (std::size_t g1 = 0; g1 < n; ++g1) {
            const double v = trap[0][g0] * trap[1][g1] * f[0][g0] * f[1][g1] * rescale;
            mass += v;
            moment[0] += v * nodes[0][g0];
            moment[1] += v * nodes[1][g1];
          }
        }
      }
    }
  }
  for (std::size_t ai = 0; ai < atoms.size(); ++ai) {
    const double v = std::exp(atom_log[ai] - shift);
    mass += v;
    moment += v * comps[atoms[ai]].mean;
  }
  return moment / mass;
}

std::vector<double> class_log_densities(const LabeledMixture& lmix, const Sample& x, double sigma) {
  const int n_classes = lmix.num_classes();
  std::vector<std::vector<double>> per_class(static_cast<std::size_t>(n_classes));
  const auto& comps = lmix.mixture.components();
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (comps[k].weight <= 0.0) continue;
    const Sample v = (comps[k].variance.array() + sigma * sigma).matrix();
    if ((v.array() <= 0.0).any()) throw std::domain_error("class density undefined for a point mass");
    per_class[static_cast<std::size_t>(lmix.labels[k])].push_back(std::log(comps[k].weight) +
                                                                   log_gaussian(x, comps[k].mean, v));
  }
  std::vector<double> out(static_cast<std::size_t>(n_classes), kNegInf);
  for (int c = 0; c < n_classes; ++c) {
    if (!per_class[static_cast<std::size_t>(c)].empty()) {
      out[static_cast<std::size_t>(c)] = log_sum_exp(per_class[static_cast<std::size_t>(c)]);
    }
  }
  return out;
}

int bayes_classifier(const LabeledMixture& lmix, const Sample& x) {
  const auto logp = class_log_densities(lmix, x);
  int best = 0;
  for (int c = 1; c < static_cast<int>(logp.size()); ++c) {
    if (logp[static_cast<std::size_t>(c)] > logp[static_cast<std::size_t>(best)]) best = c;
  }
  return best;
}

}  // namespace nadd
