#pragma once

// Population losses along the ray beta = alpha * mu. Along the ray
// beta^T x = alpha * (yX + sigma g), so every scan reduces to scalar Monte
// Carlo over w = yX + sigma g with the same draws shared by all grid points.

#include "selftrain/distributions.hpp"
#include "selftrain/estimators.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace selftrain {

enum class RayKind {
  supervised,
  unsupervised,
  semisup_regularized,
  semisup_constraint_indicator,
  gradient_norm_supervised,
  gradient_norm_unsupervised,
  scale_decay,
};

std::string ray_kind_name(RayKind kind);

struct RayScan {
  RayKind kind = RayKind::supervised;
  std::vector<double> alphas;
  std::vector<double> values;
  std::vector<double> std_errors;
  /// Points whose acceptance probability estimate fell below 1e-3.
  std::vector<bool> flagged;
  /// Signed derivative for gradient kinds; empty otherwise.
  std::vector<double> signed_gradient;
};

struct SemiSupSpec {
  double mix_rho = 0.0;
  double constraint_xi = 0.0;
  double Gamma = 0.0;
};

inline constexpr std::size_t default_grid_points = 401;
inline constexpr std::size_t default_mc_samples = 100000;
inline constexpr double min_acceptance = 1e-3;

/// `count` evenly spaced points on [lo, hi].
std::vector<double> linear_grid(double lo, double hi, std::size_t count);

/// 401 points on [-3, 3].
std::vector<double> default_grid();

/// (1/2)[(E[X^2] + sigma^2) alpha^2 - 2 E[X] alpha + 1].
RayScan supervised_loss_ray(const XLaw& law, double sigma, const std::vector<double>& alphas);

/// Ratio estimate of (1/2) E[1(accept)(sgn - beta^T x)^2] / P(accept).
RayScan unsupervised_loss_ray(const XLaw& law, double sigma, double Gamma, const std::vector<double>& alphas,
                              std::size_t mc_samples, const SeedSpec& seed);

/// kind = semisup_regularized: (1 - rho) L + rho L~.
/// kind = semisup_constraint_indicator: 1(L~ <= Xi).
RayScan semisup_ray(const SemiSupSpec& spec, RayKind kind, const XLaw& law, double sigma,
                    const std::vector<double>& alphas, std::size_t mc_samples, const SeedSpec& seed);

/// |dL/dalpha| by central differences with step half the grid spacing, for
/// kind = supervised or unsupervised.
RayScan gradient_norm_ray(RayKind kind, const XLaw& law, double sigma, double Gamma,
                          const std::vector<double>& alphas, std::size_t mc_samples, const SeedSpec& seed);

enum class ClassificationLoss { logistic, exponential };

double classification_loss(ClassificationLoss loss, double t);

/// E[l(alpha |beta^T x|)] for the unit-norm direction of `model`.
RayScan scale_decay_curve(const LinearModel& model, const MixtureSpec& spec, ClassificationLoss loss,
                          const std::vector<double>& alphas, std::size_t mc_samples, const SeedSpec& seed);

/// Columns: alpha,value,std_error,flagged.
void write_csv(std::ostream& out, const RayScan& scan);

/// Index of the smallest value among unflagged points.
std::size_t argmin_index(const RayScan& scan);

/// Locations where `values` changes sign, by linear interpolation between
/// neighboring grid points. `rising_only` keeps only - to + changes.
std::vector<double> zero_crossings(const std::vector<double>& alphas, const std::vector<double>& values,
                                   bool rising_only = false);

}  // namespace selftrain
