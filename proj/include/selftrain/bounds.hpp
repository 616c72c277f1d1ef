#pragma once

// Generalization machinery over finite classes of linear functions
// f(x) = beta^T x, where every sup, argmin and sublevel set is an exact
// enumeration.

#include "selftrain/distributions.hpp"
#include "selftrain/estimators.hpp"

#include "json.hpp"

#include <limits>
#include <vector>

namespace selftrain {

class FiniteClass {
 public:
  explicit FiniteClass(std::vector<LinearModel> members);

  /// K unit vectors at angles 2 pi k / K in R^2, each multiplied by `scale`.
  static FiniteClass direction_grid_2d(int K, double scale = 1.0);
  /// K random unit directions in R^p, each multiplied by `scale`.
  static FiniteClass random_dictionary(int K, int p, const SeedSpec& seed, double scale = 1.0);

  /// Every member multiplied by c > 0.
  FiniteClass scaled(double c) const;
  /// This class followed by the negation of each member.
  FiniteClass with_negations() const;

  std::size_t size() const { return members_.size(); }
  int dim() const { return static_cast<int>(members_.front().dim()); }
  const LinearModel& operator[](std::size_t k) const { return members_[k]; }
  const std::vector<LinearModel>& members() const { return members_; }

  /// u x K matrix of f_k(x_i).
  Eigen::MatrixXd evaluate(const Matrix& inputs) const;

 private:
  std::vector<LinearModel> members_;
};

/// 1 on [0, gamma], 2 - x/gamma on [gamma, 2 gamma], 0 beyond.
double margin_loss(double x, double gamma);

/// min(1, max(0, 1 - t)).
double ramp_loss(double t);

/// Fraction of samples with |f(x)| <= gamma.
double clustering_error(const LinearModel& model, const UnlabeledSet& data, double gamma);

/// P(|f(x)| <= gamma) under the mixture, in closed form (ConstantOne,
/// FoldedNormal) or by quadrature (BoundedMargin).
double clustering_error(const LinearModel& model, const MixtureSpec& spec, double gamma);

struct ErmResult {
  std::size_t index = 0;
  double risk = 0.0;
};

/// argmin_k (1/u) sum_i margin_loss(|f_k(x_i)|, gamma); ties go to the lowest index.
ErmResult unsup_erm(const FiniteClass& cls, const UnlabeledSet& data, double gamma);

struct RademacherEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo over sign vectors of (1/u) sup_k sum_i eps_i f_k(x_i).
RademacherEstimate empirical_rademacher(const FiniteClass& cls, const UnlabeledSet& data, int sign_draws,
                                        const SeedSpec& seed);

struct ClusteringBoundReport {
  int trials = 0;
  int violations = 0;
  double violation_rate = 0.0;
  /// min_k E_{2 gamma}(f_k).
  double min_error_2gamma = 0.0;
  double mean_erm_error = 0.0;
  double mean_rademacher = 0.0;
  double mean_complexity_term = 0.0;
  double confidence_term = 0.0;
  double mean_rhs = 0.0;
};

/// Per trial: u fresh samples, unsup_erm, population E_gamma of the ERM
/// against min E_{2 gamma} + (2/gamma) R_u + 2 sqrt(log(2/delta)/u).
ClusteringBoundReport clustering_bound_check(const FiniteClass& cls, const MixtureSpec& spec, double gamma,
                                             Eigen::Index u, double delta, int trials, const SeedSpec& seed,
                                             int sign_draws = 100);

struct CommonalityReport {
  double epsilon = 0.0;
  double epsilon_tilde = 0.0;
  std::size_t witness = 0;
};

/// Smallest eps~ at which the eps-sublevel set of L meets the eps~-sublevel set of L~.
CommonalityReport epsilon_tilde(const std::vector<double>& pop_L, const std::vector<double>& pop_Lt, double epsilon);

/// argmin L over members with L~ <= Xi; ties go to the lowest index.
/// Throws InfeasibleError when nothing is feasible.
std::size_t constrained_argmin(const std::vector<double>& L, const std::vector<double>& Lt, double Xi);

struct ConstrainedErmResult {
  std::size_t index = 0;
  double labeled_risk = 0.0;
  double pseudo_risk = 0.0;
};

/// Empirical losses with ramp(y f(x)) on labeled data and ramp(|f(x)|) on unlabeled data.
std::vector<double> labeled_ramp_risks(const FiniteClass& cls, const LabeledSet& data);
std::vector<double> pseudo_ramp_risks(const FiniteClass& cls, const UnlabeledSet& data);

ConstrainedErmResult constrained_erm(const FiniteClass& cls, const LabeledSet& labeled, const UnlabeledSet& unlabeled,
                                     double Xi);

struct TransferReport {
  double epsilon = 0.0;
  double delta = 0.0;
  double xi_bar = 0.0;
  double epsilon_tilde = 0.0;
  bool xi_bar_ok = false;
  bool weak_close = false;
  bool strong_close = false;
  bool premises_hold = false;
  bool feasible = false;
  std::size_t chosen = 0;
  double chosen_L = 0.0;
  double min_L = 0.0;
  bool conclusion_holds = false;
};

/// Checks closeness of empirical and population losses, then solves the
/// constrained empirical problem with Xi = xi_bar + min L~ and tests
/// L(chosen) <= min L + 3 epsilon.
TransferReport deterministic_transfer_check(const std::vector<double>& pop_L, const std::vector<double>& pop_Lt,
                                            const std::vector<double>& emp_L, const std::vector<double>& emp_Lt,
                                            double epsilon, double delta, double xi_bar);

/// A random K-member instance: uniform population losses, bounded empirical
/// perturbations that sometimes exceed (epsilon, delta), and xi_bar near
/// eps~ + delta. Returns the check on that instance.
TransferReport random_transfer_case(const SeedSpec& seed, int K);

void to_json(nlohmann::json& j, const ClusteringBoundReport& r);
void to_json(nlohmann::json& j, const CommonalityReport& r);
void to_json(nlohmann::json& j, const TransferReport& r);

}  // namespace selftrain
