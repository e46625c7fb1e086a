#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <optional>
#include <vector>

#include "nadd/distributions.hpp"
#include "nadd/purify.hpp"
#include "nadd/types.hpp"

namespace nadd {

/// Softmax over tempered class log-densities of a labeled mixture. This makes
/// the Bayes rule (or any surrogate mixture's rule) differentiable.
class SmoothClassifier {
 public:
  SmoothClassifier(LabeledMixture lmix, double temperature);

  const LabeledMixture& mixture() const { return lmix_; }
  double temperature() const { return temperature_; }
  int num_classes() const { return lmix_.num_classes(); }

  std::vector<double> log_probs(const Sample& x) const;
  /// Argmax of log_probs; ties go to the lowest index.
  int predict(const Sample& x) const;
  /// Gradient of the cross-entropy -log p(label | x).
  Sample loss_gradient(const Sample& x, int label) const;

 private:
  LabeledMixture lmix_;
  double temperature_;
};

SmoothClassifier smooth_classifier(const LabeledMixture& lmix, double temperature);

enum class AttackNorm { linf, l2 };
enum class AttackTarget { classifier_only, full_pipeline };
/// How gradients cross the purifier under full_pipeline.
enum class AttackGradient { bpda, full };

struct AttackConfig {
  AttackNorm norm = AttackNorm::linf;
  double budget = 0.5;
  double step_size = 0.1;
  int iterations = 10;
  int eot_samples = 1;
  AttackTarget target = AttackTarget::full_pipeline;
  AttackGradient gradient = AttackGradient::bpda;
  std::optional<std::pair<double, double>> clamp;  // data box, off by default

  std::vector<std::string> violations() const;
};

/// Optional per-iteration hook: (iteration, delta after projection).
using PgdObserver = std::function<void(int, const Sample&)>;

/// Projected gradient ascent on the classifier loss. With a pipeline and
/// target full_pipeline, each gradient is the mean over eot_samples stochastic
/// purifications; bpda treats the purifier as identity on the backward pass,
/// full chains the exact purifier Jacobian.
/// Throws std::invalid_argument for an invalid config.
Sample pgd_attack(const Sample& x, int label, const SmoothClassifier& clf, const AttackConfig& cfg,
                  const NaddPurifier* pipeline, Rng& rng, const PgdObserver& observer = {});

/// Norm of delta under the attack norm.
double attack_norm(const Sample& delta, AttackNorm norm);

struct TrialRecord {
  int trial;
  int label;
  int pred_clean;
  int pred_adv;
  int pred_purified;
  double l2_dist_purified_to_clean;
  Sample input;
  Sample adversarial;
  Sample purified;
};

struct RobustnessReport {
  double standard_accuracy = 0.0;
  double robust_accuracy = 0.0;
  int trials = 0;
  std::uint64_t seed = 0;
  int standard_correct = 0;
  int robust_correct = 0;
  std::vector<TrialRecord> records;
};

/// Draws labeled samples, attacks, optionally purifies and classifies. The
/// trial-i stream is derive_seed(seed, i), so the report depends only on the arguments.
RobustnessReport evaluate_robustness(const LabeledMixture& lmix, const SmoothClassifier& clf,
                                     const NaddPurifier* purifier, const AttackConfig& attack, int n_trials,
                                     std::uint64_t seed);

}  // namespace nadd
