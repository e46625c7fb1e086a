#include "nadd/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace nadd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Gradient of log sum_{k in class} w_k N(x; mu_k, s_k^2) for every class.
std::vector<Sample> class_log_density_gradients(const LabeledMixture& lmix, const Sample& x) {
  const int n_classes = lmix.num_classes();
  const auto& comps = lmix.mixture.components();
  std::vector<std::vector<std::pair<double, Sample>>> parts(static_cast<std::size_t>(n_classes));
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (comps[k].weight <= 0.0) continue;
    const auto& v = comps[k].variance;
    double logp = std::log(comps[k].weight);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double r = x[i] - comps[k].mean[i];
      logp -= 0.5 * (r * r / v[i] + std::log(2.0 * std::numbers::pi * v[i]));
    }
    parts[static_cast<std::size_t>(lmix.labels[k])].emplace_back(
        logp, ((comps[k].mean - x).array() / v.array()).matrix());
  }
  std::vector<Sample> out(static_cast<std::size_t>(n_classes), Sample::Zero(x.size()));
  for (std::size_t c = 0; c < parts.size(); ++c) {
    if (parts[c].empty()) continue;
    double m = kNegInf;
    for (const auto& [lp, g] : parts[c]) m = std::max(m, lp);
    double z = 0.0;
    for (const auto& [lp, g] : parts[c]) z += std::exp(lp - m);
    for (const auto& [lp, g] : parts[c]) out[c] += std::exp(lp - m) / z * g;
  }
  return out;
}

}  // namespace

SmoothClassifier::SmoothClassifier(LabeledMixture lmix, double temperature)
    : lmix_(std::move(lmix)), temperature_(temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("smooth_classifier: temperature must be > 0");
  for (const auto& c : lmix_.mixture.components()) {
    if ((c.variance.array() <= 0.0).any()) {
      throw std::invalid_argument("smooth_classifier: component variances must be positive");
    }
  }
}

SmoothClassifier smooth_classifier(const LabeledMixture& lmix, double temperature) {
  return SmoothClassifier(lmix, temperature);
}

std::vector<double> SmoothClassifier::log_probs(const Sample& x) const {
  auto logits = class_log_densities(lmix_, x);
  double m = kNegInf;
  for (auto& l : logits) {
    l /= temperature_;
    m = std::max(m, l);
  }
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double log_z = m + std::log(z);
  for (auto& l : logits) l -= log_z;
  return logits;
}

int SmoothClassifier::predict(const Sample& x) const {
  const auto lp = log_probs(x);
  return static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
}

Sample SmoothClassifier::loss_gradient(const Sample& x, int label) const {
  const auto lp = log_probs(x);
  const auto grads = class_log_density_gradients(lmix_, x);
  // g_label - sum_c p_c g_c written as sum over the other classes, so a confident
  // classifier does not lose the gradient to cancellation against p_label ~ 1.
  const auto own = static_cast<std::size_t>(label);
  Sample diff = Sample::Zero(x.size());
  for (std::size_t c = 0; c < lp.size(); ++c) {
    if (c == own || lp[c] == kNegInf) continue;
    diff += std::exp(lp[c]) * (grads[own] - grads[c]);
  }
  return -diff / temperature_;
}

std::vector<std::string> AttackConfig::violations() const {
  std::vector<std::string> out;
  if (!(budget > 0.0)) out.push_back("attack.budget: must be > 0");
  if (!(step_size > 0.0)) out.push_back("attack.step_size: must be > 0");
  if (iterations < 1) out.push_back("attack.iterations: must be >= 1");
  if (eot_samples < 1) out.push_back("attack.eot_samples: must be >= 1");
  if (clamp && !(clamp->first < clamp->second)) out.push_back("attack.clamp: lower bound must be below upper");
  return out;
}

double attack_norm(const Sample& delta, AttackNorm norm) {
  return norm == AttackNorm::linf ? delta.lpNorm<Eigen::Infinity>() : delta.norm();
}

Sample pgd_attack(const Sample& x, int label, const SmoothClassifier& clf, const AttackConfig& cfg,
                  const NaddPurifier* pipeline, Rng& rng, const PgdObserver& observer) {
  const auto bad = cfg.violations();
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "invalid attack configuration:";
    for (const auto& b : bad) msg << " " << b << ";";
    throw std::invalid_argument(msg.str());
  }
  const bool through_pipeline = pipeline && cfg.target == AttackTarget::full_pipeline;
  Sample delta = Sample::Zero(x.size());
  for (int it = 0; it < cfg.iterations; ++it) {
    const Sample x_adv = x + delta;
    Sample grad = Sample::Zero(x.size());
    if (through_pipeline) {
      for (int e = 0; e < cfg.eot_samples; ++e) {
        if (cfg.gradient == AttackGradient::bpda) {
          grad += clf.loss_gradient((*pipeline)(x_adv, rng), label);
        } else {
          Matrix jac;
          const Sample y = (*pipeline)(x_adv, rng, jac);
          grad += jac.transpose() * clf.loss_gradient(y, label);
        }
      }
      grad /= cfg.eot_samples;
    } else {
      grad = clf.loss_gradient(x_adv, label);
    }

    if (cfg.norm == AttackNorm::linf) {
      delta += cfg.step_size * grad.unaryExpr([](double g) { return static_cast<double>((g > 0.0) - (g < 0.0)); });
      delta = delta.cwiseMax(-cfg.budget).cwiseMin(cfg.budget);
    } else {
      const double n = grad.norm();
      if (n > 0.0) delta += cfg.step_size * grad / n;
      const double dn = delta.norm();
      if (dn > cfg.budget) {
        delta *= cfg.budget / dn;
        for (int k = 0; k < 64 && delta.norm() > cfg.budget; ++k) delta *= 1.0 - std::numeric_limits<double>::epsilon();
      }
    }
    if (cfg.clamp) {
      const Sample boxed = (x + delta).cwiseMax(cfg.clamp->first).cwiseMin(cfg.clamp->second);
      delta = boxed - x;
    }
    if (observer) observer(it, delta);
  }
  return x + delta;
}

RobustnessReport evaluate_robustness(const LabeledMixture& lmix, const SmoothClassifier& clf,
                                     const NaddPurifier* purifier, const AttackConfig& attack, int n_trials,
                                     std::uint64_t seed) {
  if (n_trials < 1) throw std::invalid_argument("evaluate_robustness: n_trials must be >= 1");
  RobustnessReport report;
  report.trials = n_trials;
  report.seed = seed;
  report.records.reserve(static_cast<std::size_t>(n_trials));
  for (int i = 0; i < n_trials; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto draw = sample_one(lmix.mixture, rng);
    const int label = lmix.labels[draw.component];
    const Sample clean_out = purifier ? (*purifier)(draw.x, rng) : draw.x;
    const Sample adv = pgd_attack(draw.x, label, clf, attack, purifier, rng);
    const Sample purified = purifier ? (*purifier)(adv, rng) : adv;
    TrialRecord rec{i,
                    label,
                    clf.predict(clean_out),
                    clf.predict(adv),
                    clf.predict(purified),
                    (purified - draw.x).norm(),
                    draw.x,
                    adv,
                    purified};
    report.standard_correct += rec.pred_clean == label;
    report.robust_correct += rec.pred_purified == label;
    report.records.push_back(std::move(rec));
  }
  report.standard_accuracy = static_cast<double>(report.standard_correct) / n_trials;
  report.robust_accuracy = static_cast<double>(report.robust_correct) / n_trials;
  return report;
}

}  // namespace nadd
