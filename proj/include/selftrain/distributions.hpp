#pragma once

// Binary Gaussian mixture and the generalized mixture x = y*X*mu + sigma*g.

#include "selftrain/numerics.hpp"

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace selftrain {

/// X == 1; the generalized mixture reduces to the binary GMM.
struct ConstantOne {};

/// X = |N(0,1)|, so y*X is standard normal.
struct FoldedNormal {};

/// X = gamma + (M*gamma - gamma)*U with U ~ Uniform[0,1], and gamma chosen so
/// that E[X^2] = 1. Support is [gamma, M*gamma].
struct BoundedMargin {
  double gamma = 1.0;
  double M = 1.0;

  /// The uniform-shape law with ratio M >= 1, normalized to E[X^2] = 1.
  static BoundedMargin with_ratio(double M);
};

using XLaw = std::variant<ConstantOne, FoldedNormal, BoundedMargin>;

std::string law_name(const XLaw& law);
double law_mean(const XLaw& law);
double law_second_moment(const XLaw& law);
/// Q_X(t) = P(X > t).
double law_tail(const XLaw& law, double t);
double sample_law(const XLaw& law, Rng& rng);

/// Parameters of a two-class mixture in R^p.
struct MixtureSpec {
  Vector mu;
  double sigma = 1.0;
  XLaw x_law = ConstantOne{};

  int p() const { return static_cast<int>(mu.size()); }

  /// Throws DomainError unless |mu| = 1 (within 1e-12) and sigma >= 0.
  void validate() const;

  /// Binary GMM with mu = e_1.
  static MixtureSpec binary_gmm(int p, double sigma);
  /// Generalized mixture with mu = e_1.
  static MixtureSpec general(int p, double sigma, XLaw law);
};

struct LabeledSet {
  Matrix inputs;
  std::vector<int> labels;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }
};

struct UnlabeledSet {
  Matrix inputs;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }
};

LabeledSet sample_labeled(const MixtureSpec& spec, Eigen::Index n, const SeedSpec& seed);
UnlabeledSet sample_unlabeled(const MixtureSpec& spec, Eigen::Index u, const SeedSpec& seed);

/// Eigenvalues of E[xx^T] along mu and orthogonal to mu.
struct SecondMoment {
  double signal_eig;
  double noise_eig;
};

SecondMoment population_second_moment(const MixtureSpec& spec);

// Columnar binary cache. Layout, all little-endian: uint64 p, uint64 count,
// uint64 label flag (0/1), then p columns of `count` float64 values, then (if
// flagged) one column of `count` float64 labels.
void write_cache(std::ostream& out, const LabeledSet& data);
void write_cache(std::ostream& out, const UnlabeledSet& data);
LabeledSet read_labeled_cache(std::istream& in);
UnlabeledSet read_unlabeled_cache(std::istream& in);

}  // namespace selftrain
