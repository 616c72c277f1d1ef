#pragma once

// Scalar and vector primitives shared by every other module: standard normal
// tail and density, alignment geometry between vectors, and reproducible
// random streams.

#include <Eigen/Dense>
#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <cstdint>
#include <random>

namespace selftrain {

using Vector = Eigen::VectorXd;
/// Sample matrices hold one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// P(N(0,1) > x).
double q_tail(double x);

/// P(N(0,1) <= x).
double normal_cdf(double x);

/// Standard normal density.
double normal_pdf(double x);

/// <a,b>/(|a||b|). Throws DegenerateModelError when either vector is zero or
/// the lengths differ.
double correlation(const Vector& a, const Vector& b);

/// rho/sqrt(1-rho^2). Perfect (anti)alignment yields +/-infinity; that value is
/// the saturation sentinel (see `cotangent_saturated`).
double cotangent_from_correlation(double rho);

/// Inverse of `cotangent_from_correlation`: x/sqrt(1+x^2).
double correlation_from_cotangent(double cot);

/// Co-tangent of the angle between a and b.
double cotangent(const Vector& a, const Vector& b);

inline bool cotangent_saturated(double cot) { return std::isinf(cot); }

/// (E|g|)^2 for g ~ N(0, I_p), evaluated through log-gamma. Lies in [p-1, p].
double gamma_norm_sq(int p);

/// Identifies one random stream. Distinct pairs give independent streams; the
/// same pair always gives the same stream.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;

  /// A sub-stream keyed by `index`, independent of this stream and of the
  /// children of every other stream.
  SeedSpec child(std::uint64_t index) const;

  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// 64-bit seed of the engine behind a SeedSpec.
std::uint64_t stream_seed(const SeedSpec& seed);

/// Value-typed random stream. Never share one instance between threads.
class Rng {
 public:
  explicit Rng(const SeedSpec& seed) : engine_(stream_seed(seed)) {}

  double normal() { return normal_(engine_); }

  /// Uniform on [0,1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// +1 or -1 with probability 1/2 each.
  int rademacher() { return (engine_() >> 63) != 0 ? 1 : -1; }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

  void fill_normal(double* out, Eigen::Index count) {
    for (Eigen::Index i = 0; i < count; ++i) out[i] = normal_(engine_);
  }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_;
};

/// p i.i.d. standard normal entries drawn from the stream `seed`.
Vector gaussian_vector(int p, const SeedSpec& seed);

/// Sign with the tie at zero mapped to +1.
inline int sign_label(double v) { return v >= 0.0 ? 1 : -1; }

}  // namespace selftrain
