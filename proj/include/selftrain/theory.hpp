#pragma once

// Closed-form predictions for the self-training estimators: the one-step
// co-tangent map and its iteration, finite-sample sandwich bounds, the
// supervised baseline, regularization factors, the margin lower bound and
// the rejection/tail bounds.

#include "selftrain/distributions.hpp"

namespace selftrain {

struct SelfTrainQuantities {
  double gbar_plus = 0.0;   // (Gamma - alpha)/sigma
  double gbar_minus = 0.0;  // (Gamma + alpha)/sigma
  double Lambda = 0.0;
  double rho = 0.0;  // acceptance probability
  double nu = 0.0;
};

SelfTrainQuantities quantities(double alpha, double sigma, double Gamma);

/// F_u(x) with alpha = x/sqrt(1+x^2).
double cot_update(double x, double sigma, double Gamma, double u_bar);

/// F_u(x) as u_bar grows without bound.
double cot_update_limit(double x, double sigma, double Gamma);

struct CotBounds {
  double lower = 0.0;
  double upper = 0.0;
  double epsilon = 0.0;
  /// The epsilon = 0 member of the sandwich.
  double asymptotic = 0.0;
};

/// Two-sided bound on cot(beta_hat, mu) after one step with u samples in R^p.
/// Throws InvalidResolutionError unless 0 < epsilon < 1/2, p >= 3 and u >= 1.
CotBounds cot_bounds(double alpha, double sigma, double Gamma, int p, long long u, double epsilon);

/// tau-fold composition of F_u starting from sqrt(n_bar)/sigma.
double iterate_prediction(double n_bar, double u_bar, double sigma, double Gamma, int tau);

/// Limit cot of the averaging estimator with n = n_bar * p labels: sqrt(n_bar)/sigma.
double supervised_cot(double n_bar, double sigma);

struct SupervisedBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Finite-sample sandwich for the averaging estimator with n labels in R^p.
SupervisedBounds supervised_cot_bounds(long long n, int p, double sigma, double epsilon);

/// The u_bar at which F_u(x) = x. Returns +infinity if F_u(x) < x for every u_bar.
double fixed_point_u_bar(double x, double sigma, double Gamma);

/// Ridge improvement factor kappa(lambda); lambda = +infinity gives 1 + sigma^-2.
double ridge_kappa(double lambda, double sigma);

/// 1 + sigma^-2.
double early_stop_factor(double sigma);

struct MarginBound {
  /// (sigma e^C / 4) gamma (1 - 6 e^-C M) with C = alpha^2 gamma^2 / (2 sigma^2).
  double general = 0.0;
  /// 0.1 sigma gamma e^{alpha^2 gamma^2 / sigma^2}, valid when condition_met.
  double strong = 0.0;
  /// alpha gamma > sqrt(2 log(12 M)) sigma.
  bool condition_met = false;
  /// general <= 0.
  bool vacuous = false;
};

/// Throws DomainError unless 1 >= gamma >= sigma > 0, M >= 1, 0 < alpha <= 1.
MarginBound margin_lower_bound(double alpha, double gamma, double sigma, double M);

/// Upper bound on P(sign(beta_init^T z) != sign(mu^T z)) for accepted z, with
/// X >= gamma_bar * sigma and Gamma = alpha sigma Gamma_bar. Gamma_bar = 0
/// gives 2 Q(alpha gamma_bar).
double rejection_mislabel_bound(double alpha, double gamma_bar, double Gamma_bar, const XLaw& law);

/// sqrt(2/pi) e^{-alpha^2/2}.
double folded_tail_bound(double alpha);

}  // namespace selftrain
