#include "selftrain/theory.hpp"

#include "selftrain/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace selftrain {

namespace {

double numerator(const SelfTrainQuantities& q, double alpha, double sigma) {
  return 1.0 + sigma * alpha * q.Lambda - 2.0 * q.nu;
}

}  // namespace

SelfTrainQuantities quantities(double alpha, double sigma, double Gamma) {
  if (!(sigma > 0.0)) throw DomainError("quantities: sigma must be > 0");
  if (!(Gamma >= 0.0)) throw DomainError("quantities: Gamma must be >= 0");
  SelfTrainQuantities q;
  q.gbar_plus = (Gamma - alpha) / sigma;
  q.gbar_minus = (alpha + Gamma) / sigma;
  q.rho = q_tail(q.gbar_plus) + q_tail(q.gbar_minus);
  q.nu = q_tail(q.gbar_minus) / q.rho;
  q.Lambda = (normal_pdf(q.gbar_plus) + normal_pdf(q.gbar_minus)) / q.rho;
  return q;
}

double cot_update(double x, double sigma, double Gamma, double u_bar) {
  if (!(u_bar > 0.0)) throw DomainError("cot_update: u_bar must be > 0");
  const double alpha = x / std::sqrt(1.0 + x * x);
  const auto q = quantities(alpha, sigma, Gamma);
  const double den = sigma * std::sqrt(q.Lambda * q.Lambda / (1.0 + x * x) + 1.0 / (u_bar * q.rho));
  return numerator(q, alpha, sigma) / den;
}

double cot_update_limit(double x, double sigma, double Gamma) {
  const double alpha = x / std::sqrt(1.0 + x * x);
  const auto q = quantities(alpha, sigma, Gamma);
  return numerator(q, alpha, sigma) / (sigma * q.Lambda / std::sqrt(1.0 + x * x));
}

CotBounds cot_bounds(double alpha, double sigma, double Gamma, int p, long long u, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw InvalidResolutionError("cot_bounds: epsilon must lie in (0, 1/2)");
  if (p < 3) throw InvalidResolutionError("cot_bounds: p must be >= 3");
  if (u < 1) throw InvalidResolutionError("cot_bounds: u must be >= 1");
  const auto q = quantities(alpha, sigma, Gamma);
  const double beta = std::sqrt(std::max(0.0, 1.0 - alpha * alpha));
  const double n0 = numerator(q, alpha, sigma);
  const double slack = (1.0 + sigma) * epsilon;
  const double noise = gamma_norm_sq(p - 2) / (static_cast<double>(u) * q.rho);
  const double bl = beta * q.Lambda;

  const double up_a = std::max(0.0, bl - epsilon);
  const double up_b = std::max(0.0, 1.0 - epsilon);
  const double up_den = sigma * std::sqrt(up_a * up_a + up_b * up_b * noise);
  const double lo_den =
      sigma * std::sqrt((bl + epsilon) * (bl + epsilon) + (1.0 + epsilon) * (1.0 + epsilon) * noise);
  if (!(up_den > 0.0) || !(lo_den > 0.0))
    throw InvalidResolutionError("cot_bounds: nonpositive denominator at this epsilon");

  CotBounds b;
  b.epsilon = epsilon;
  b.upper = (n0 + slack) / up_den;
  b.lower = (n0 - slack) / lo_den;
  b.asymptotic = n0 / (sigma * std::sqrt(bl * bl + noise));
  return b;
}

double supervised_cot(double n_bar, double sigma) {
  if (!(n_bar > 0.0)) throw DomainError("supervised_cot: n_bar must be > 0");
  if (!(sigma > 0.0)) throw DomainError("supervised_cot: sigma must be > 0");
  return std::sqrt(n_bar) / sigma;
}

SupervisedBounds supervised_cot_bounds(long long n, int p, double sigma, double epsilon) {
  if (n < 1 || p < 1) throw DomainError("supervised_cot_bounds: n and p must be >= 1");
  if (!(sigma > 0.0)) throw DomainError("supervised_cot_bounds: sigma must be > 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidResolutionError("supervised_cot_bounds: epsilon must lie in (0,1)");
  const double scale = sigma * std::sqrt(static_cast<double>(p) / static_cast<double>(n));
  return {(1.0 - sigma * epsilon) / ((1.0 + epsilon) * scale), (1.0 + sigma * epsilon) / ((1.0 - epsilon) * scale)};
}

double iterate_prediction(double n_bar, double u_bar, double sigma, double Gamma, int tau) {
  if (tau < 0) throw DomainError("iterate_prediction: tau must be >= 0");
  double x = supervised_cot(n_bar, sigma);
  for (int i = 0; i < tau; ++i) x = cot_update(x, sigma, Gamma, u_bar);
  return x;
}

double fixed_point_u_bar(double x, double sigma, double Gamma) {
  if (!(x > 0.0)) throw DomainError("fixed_point_u_bar: x must be > 0");
  if (cot_update_limit(x, sigma, Gamma) <= x) return std::numeric_limits<double>::infinity();
  // F_u(x) increases in u; bisect on log(u).
  double lo = std::log(1e-12);
  double hi = std::log(1e12);
  if (cot_update(x, sigma, Gamma, std::exp(hi)) <= x) return std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cot_update(x, sigma, Gamma, std::exp(mid)) < x)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

double ridge_kappa(double lambda, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("ridge_kappa: sigma must be > 0");
  if (!(lambda >= 0.0)) throw DomainError("ridge_kappa: lambda must be >= 0");
  const double s2 = sigma * sigma;
  if (std::isinf(lambda)) return early_stop_factor(sigma);
  return ((1.0 + s2) / s2) * ((s2 + lambda) / (1.0 + s2 + lambda));
}

double early_stop_factor(double sigma) {
  if (!(sigma > 0.0)) throw DomainError("early_stop_factor: sigma must be > 0");
  return 1.0 + 1.0 / (sigma * sigma);
}

MarginBound margin_lower_bound(double alpha, double gamma, double sigma, double M) {
  if (!(sigma > 0.0 && gamma >= sigma && gamma <= 1.0))
    throw DomainError("margin_lower_bound: requires 1 >= gamma >= sigma > 0");
  if (!(M >= 1.0)) throw DomainError("margin_lower_bound: requires M >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("margin_lower_bound: requires 0 < alpha <= 1");
  const double ag = alpha * gamma;
  const double C = ag * ag / (2.0 * sigma * sigma);
  MarginBound b;
  b.general = sigma * std::exp(C) / 4.0 * gamma * (1.0 - 6.0 * std::exp(-C) * M);
  b.strong = 0.1 * sigma * gamma * std::exp(ag * ag / (sigma * sigma));
  b.condition_met = ag > std::sqrt(2.0 * std::log(12.0 * M)) * sigma;
  b.vacuous = b.general <= 0.0;
  return b;
}

double rejection_mislabel_bound(double alpha, double gamma_bar, double Gamma_bar, const XLaw& law) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("rejection_mislabel_bound: alpha must lie in (0,1)");
  if (!(gamma_bar > 0.0)) throw DomainError("rejection_mislabel_bound: gamma_bar must be > 0");
  if (!(Gamma_bar >= 0.0)) throw DomainError("rejection_mislabel_bound: Gamma_bar must be >= 0");
  if (Gamma_bar == 0.0) return 2.0 * q_tail(alpha * gamma_bar);
  const double num = q_tail(gamma_bar) * q_tail(alpha * Gamma_bar / std::sqrt(1.0 - alpha * alpha)) +
                     q_tail(alpha * (gamma_bar + Gamma_bar));
  const double tail = law_tail(law, Gamma_bar);
  if (tail <= 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * num / tail;
}

double folded_tail_bound(double alpha) {
  if (!(alpha >= 0.0)) throw DomainError("folded_tail_bound: alpha must be >= 0");
  return std::sqrt(2.0 / std::numbers::pi) * std::exp(-0.5 * alpha * alpha);
}

}  // namespace selftrain
