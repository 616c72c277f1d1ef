#pragma once

// Learning procedures: the averaging estimator, thresholded pseudo-labeling,
// fresh-batch and reused-batch self-training schedules, logistic regression on
// pseudo-labels, and the ridge / early-stopping pseudo-label regressions.

#include "selftrain/distributions.hpp"
#include "selftrain/numerics.hpp"

#include <optional>
#include <vector>

namespace selftrain {

/// A linear classifier sign(beta^T x). The zero vector is rejected.
class LinearModel {
 public:
  explicit LinearModel(Vector beta);

  const Vector& beta() const { return beta_; }
  Eigen::Index dim() const { return beta_.size(); }

  /// Hard label of x, with sign(0) = +1.
  int predict(const Vector& x) const { return sign_label(beta_.dot(x)); }

 private:
  Vector beta_;
};

struct PseudoLabeledSet {
  Matrix inputs;
  std::vector<int> pseudo_labels;
  std::size_t accepted_count = 0;
  std::size_t rejected_count = 0;
};

struct TrainConfig {
  double gamma_threshold = 0.0;
  /// Ridge weight. Unset means 1e-3 / accepted_count for logistic fits.
  std::optional<double> ridge_lambda;
  /// Gradient step. Unset means 1 / (smoothness constant) of the objective.
  std::optional<double> step_size;
  int max_steps = 1000;
  double tolerance = 1e-6;

  void validate() const;
};

LinearModel averaging_fit(const LabeledSet& data);

/// Keeps inputs with |beta^T x|/|beta| >= gamma and labels them sign(beta^T x).
PseudoLabeledSet pseudo_label_select(const LinearModel& model, const UnlabeledSet& data, double gamma);

/// Mean of pseudo_label * x over accepted samples.
LinearModel self_train_step(const LinearModel& model, const UnlabeledSet& data, double gamma);

/// Alignment of one iterate with the mixture direction.
struct AlignmentStats {
  int round = 0;
  double correlation = 0.0;
  double cotangent = 0.0;
  double accuracy = 0.0;
  /// Correlation with the previous iterate (1 for round 0).
  double step_correlation = 1.0;
  std::size_t accepted = 0;
};

struct Trajectory {
  LinearModel model;
  /// Entry 0 describes the starting model; entry i the model after round i.
  std::vector<AlignmentStats> rounds;
};

AlignmentStats alignment_stats(const LinearModel& model, const MixtureSpec& spec, int round = 0);

/// Fresh-ST: round i draws its own batch of `u_per_round` samples from
/// stream seed.child(i).
Trajectory iterate_fresh(const LinearModel& model0, const MixtureSpec& spec, Eigen::Index u_per_round, double gamma,
                         int rounds, const SeedSpec& seed);

/// Iterative-ST: every round reuses `data`. `reference` supplies mu and sigma
/// for the recorded statistics.
Trajectory iterate_reuse(const LinearModel& model0, const UnlabeledSet& data, double gamma, int rounds,
                         const MixtureSpec& reference);

struct LogisticResult {
  LinearModel model;
  double lambda = 0.0;
  int steps = 0;
  double gradient_norm = 0.0;
  double loss = 0.0;
  bool converged = false;
  /// Set when lambda = 0 and the final model separates the training data.
  bool divergence_risk = false;
};

/// Full-batch gradient descent from beta = 0 on
/// mean log(1 + exp(-y beta^T x)) + lambda |beta|^2.
LogisticResult logistic_fit(const PseudoLabeledSet& data, const TrainConfig& cfg);

/// Regularized logistic objective at beta (for diagnostics and tests).
double logistic_objective(const PseudoLabeledSet& data, const Vector& beta, double lambda);

/// 1 / (smoothness constant) of the logistic objective on `data`.
double logistic_step_size(const PseudoLabeledSet& data, double lambda);

/// Minimizer of (1/u) sum 1(accept)(pseudo_label - beta^T x)^2 + lambda |beta|^2.
LinearModel ridge_pseudo_fit(const LinearModel& model_init, const UnlabeledSet& data, double gamma, double lambda);

/// (1/u) sum 1(accept) sign(beta_init^T x) x, one gradient step from zero.
LinearModel early_stop_fit(const LinearModel& model_init, const UnlabeledSet& data, double gamma);

/// P(sign(beta^T x) = y) on the binary GMM for a model with correlation alpha.
double accuracy_from_alignment(double alpha, double sigma);

/// Same probability for a general mixture law: E_X[Phi(alpha X / sigma)].
double population_accuracy(double alpha, double sigma, const XLaw& law);

}  // namespace selftrain
