#include "selftrain/numerics.hpp"

#include "selftrain/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace selftrain {

double q_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double correlation(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DegenerateModelError("correlation: vectors differ in length");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DegenerateModelError("correlation: zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double cotangent_from_correlation(double rho) {
  if (rho >= 1.0) return std::numeric_limits<double>::infinity();
  if (rho <= -1.0) return -std::numeric_limits<double>::infinity();
  return rho / std::sqrt(1.0 - rho * rho);
}

double correlation_from_cotangent(double cot) {
  if (std::isinf(cot)) return cot > 0 ? 1.0 : -1.0;
  return cot / std::sqrt(1.0 + cot * cot);
}

double cotangent(const Vector& a, const Vector& b) { return cotangent_from_correlation(correlation(a, b)); }

double gamma_norm_sq(int p) {
  if (p < 1) throw DomainError("gamma_norm_sq: p must be >= 1");
  // E|g| = sqrt(2) * Gamma((p+1)/2) / Gamma(p/2)
  const double log_mean = 0.5 * std::log(2.0) + std::lgamma(0.5 * (p + 1)) - std::lgamma(0.5 * p);
  return std::exp(2.0 * log_mean);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(const SeedSpec& seed) {
  return mix64(mix64(seed.master_seed) ^ mix64(seed.stream_index + 0x632be59bd9b4e019ULL));
}

SeedSpec SeedSpec::child(std::uint64_t index) const { return SeedSpec{stream_seed(*this), index}; }

Vector gaussian_vector(int p, const SeedSpec& seed) {
  if (p < 1) throw DomainError("gaussian_vector: p must be >= 1");
  Rng rng(seed);
  Vector g(p);
  rng.fill_normal(g.data(), p);
  return g;
}

}  // namespace selftrain
