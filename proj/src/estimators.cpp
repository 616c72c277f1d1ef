#include "selftrain/estimators.hpp"

#include "selftrain/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace selftrain {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

// (1/denominator) * sum_i w_i x_i. Shared by every mean-type estimator so that
// equal inputs give bitwise-equal outputs.
Vector weighted_mean(const Matrix& inputs, const Vector& weights, double denominator) {
  return (inputs.transpose() * weights) / denominator;
}

// Per-sample weights 1(accept)*sign(beta^T x) and the accepted count.
Vector acceptance_weights(const LinearModel& model, const Matrix& inputs, double gamma, std::size_t& accepted) {
  if (!(gamma >= 0.0)) throw DomainError("acceptance threshold must be >= 0");
  if (inputs.cols() != model.dim()) throw DomainError("model and data dimensions differ");
  const Vector direction = model.beta() / model.beta().norm();
  const Vector margins = inputs * direction;
  Vector weights(margins.size());
  accepted = 0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) {
    if (std::abs(margins[i]) >= gamma) {
      weights[i] = sign_label(margins[i]);
      ++accepted;
    } else {
      weights[i] = 0.0;
    }
  }
  return weights;
}

void check_nonempty(Eigen::Index count, const char* what) {
  if (count < 1) throw DomainError(std::string(what) + ": empty data set");
}

double sigmoid_neg(double m) {
  // 1/(1+e^m), evaluated without overflow.
  if (m >= 0.0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

double log1p_exp_neg(double m) {
  // log(1+e^{-m})
  return m >= 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

Vector label_vector(const std::vector<int>& labels) {
  Vector y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y[static_cast<Eigen::Index>(i)] = labels[i];
  return y;
}

double resolve_lambda(const PseudoLabeledSet& data, const TrainConfig& cfg) {
  if (cfg.ridge_lambda) return *cfg.ridge_lambda;
  return 1e-3 / static_cast<double>(data.accepted_count);
}

}  // namespace

LinearModel::LinearModel(Vector beta) : beta_(std::move(beta)) {
  if (beta_.size() < 1) throw DegenerateModelError("LinearModel: empty weight vector");
  if (!beta_.allFinite()) throw DegenerateModelError("LinearModel: non-finite weights");
  if (beta_.squaredNorm() == 0.0) throw DegenerateModelError("LinearModel: zero weight vector");
}

void TrainConfig::validate() const {
  if (!(gamma_threshold >= 0.0)) throw DomainError("TrainConfig: gamma_threshold must be >= 0");
  if (ridge_lambda && !(*ridge_lambda >= 0.0)) throw DomainError("TrainConfig: ridge_lambda must be >= 0");
  if (step_size && !(*step_size > 0.0)) throw DomainError("TrainConfig: step_size must be > 0");
  if (max_steps < 1) throw DomainError("TrainConfig: max_steps must be >= 1");
  if (!(tolerance > 0.0)) throw DomainError("TrainConfig: tolerance must be > 0");
}

LinearModel averaging_fit(const LabeledSet& data) {
  check_nonempty(data.size(), "averaging_fit");
  if (static_cast<Eigen::Index>(data.labels.size()) != data.size())
    throw DomainError("averaging_fit: label count differs from input count");
  return LinearModel(weighted_mean(data.inputs, label_vector(data.labels), static_cast<double>(data.size())));
}

PseudoLabeledSet pseudo_label_select(const LinearModel& model, const UnlabeledSet& data, double gamma) {
  std::size_t accepted = 0;
  const Vector weights = acceptance_weights(model, data.inputs, gamma, accepted);
  PseudoLabeledSet out;
  out.inputs.resize(static_cast<Eigen::Index>(accepted), data.dim());
  out.pseudo_labels.reserve(accepted);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] == 0.0) continue;
    out.inputs.row(row++) = data.inputs.row(i);
    out.pseudo_labels.push_back(static_cast<int>(weights[i]));
  }
  out.accepted_count = accepted;
  out.rejected_count = static_cast<std::size_t>(data.size()) - accepted;
  return out;
}

LinearModel self_train_step(const LinearModel& model, const UnlabeledSet& data, double gamma) {
  check_nonempty(data.size(), "self_train_step");
  std::size_t accepted = 0;
  const Vector weights = acceptance_weights(model, data.inputs, gamma, accepted);
  if (accepted == 0) throw AllRejectedError("self_train_step: no sample passed the threshold");
  return LinearModel(weighted_mean(data.inputs, weights, static_cast<double>(accepted)));
}

double accuracy_from_alignment(double alpha, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("accuracy_from_alignment: sigma must be > 0");
  return 1.0 - q_tail(alpha / sigma);
}

double population_accuracy(double alpha, double sigma, const XLaw& law) {
  if (!(sigma >= 0.0)) throw DomainError("population_accuracy: sigma must be >= 0");
  if (sigma == 0.0) return alpha > 0.0 ? 1.0 : (alpha == 0.0 ? 0.5 : 0.0);
  return std::visit(
      overloaded{[&](const ConstantOne&) { return accuracy_from_alignment(alpha, sigma); },
                 // E[Phi(a|Z|)] = 1/2 + arctan(a)/pi
                 [&](const FoldedNormal&) { return 0.5 + std::atan(alpha / sigma) / std::numbers::pi; },
                 [&](const BoundedMargin& b) {
                   const double lo = b.gamma;
                   const double hi = b.M * b.gamma;
                   if (hi == lo) return normal_cdf(alpha * lo / sigma);
                   // Composite Simpson rule over the uniform law.
                   constexpr int intervals = 400;
                   const double h = (hi - lo) / intervals;
                   double sum = normal_cdf(alpha * lo / sigma) + normal_cdf(alpha * hi / sigma);
                   for (int k = 1; k < intervals; ++k)
                     sum += (k % 2 ? 4.0 : 2.0) * normal_cdf(alpha * (lo + k * h) / sigma);
                   return sum * h / 3.0 / (hi - lo);
                 }},
      law);
}

AlignmentStats alignment_stats(const LinearModel& model, const MixtureSpec& spec, int round) {
  AlignmentStats s;
  s.round = round;
  s.correlation = correlation(model.beta(), spec.mu);
  s.cotangent = cotangent_from_correlation(s.correlation);
  s.accuracy = population_accuracy(s.correlation, spec.sigma, spec.x_law);
  return s;
}

Trajectory iterate_fresh(const LinearModel& model0, const MixtureSpec& spec, Eigen::Index u_per_round, double gamma,
                         int rounds, const SeedSpec& seed) {
  if (rounds < 1) throw DomainError("iterate_fresh: rounds must be >= 1");
  if (u_per_round < 1) throw DomainError("iterate_fresh: u_per_round must be >= 1");
  Trajectory traj{model0, {alignment_stats(model0, spec, 0)}};
  for (int i = 1; i <= rounds; ++i) {
    const auto batch = sample_unlabeled(spec, u_per_round, seed.child(static_cast<std::uint64_t>(i)));
    std::size_t accepted = 0;
    acceptance_weights(traj.model, batch.inputs, gamma, accepted);
    try {
      LinearModel next = self_train_step(traj.model, batch, gamma);
      auto stats = alignment_stats(next, spec, i);
      stats.step_correlation = correlation(next.beta(), traj.model.beta());
      stats.accepted = accepted;
      traj.rounds.push_back(stats);
      traj.model = std::move(next);
    } catch (const AllRejectedError&) {
      throw AllRejectedError("iterate_fresh: no sample passed the threshold", i);
    }
  }
  return traj;
}

Trajectory iterate_reuse(const LinearModel& model0, const UnlabeledSet& data, double gamma, int rounds,
                         const MixtureSpec& reference) {
  if (rounds < 1) throw DomainError("iterate_reuse: rounds must be >= 1");
  Trajectory traj{model0, {alignment_stats(model0, reference, 0)}};
  for (int i = 1; i <= rounds; ++i) {
    std::size_t accepted = 0;
    acceptance_weights(traj.model, data.inputs, gamma, accepted);
    try {
      LinearModel next = self_train_step(traj.model, data, gamma);
      auto stats = alignment_stats(next, reference, i);
      stats.step_correlation = correlation(next.beta(), traj.model.beta());
      stats.accepted = accepted;
      traj.rounds.push_back(stats);
      traj.model = std::move(next);
    } catch (const AllRejectedError&) {
      throw AllRejectedError("iterate_reuse: no sample passed the threshold", i);
    }
  }
  return traj;
}

double logistic_objective(const PseudoLabeledSet& data, const Vector& beta, double lambda) {
  const Vector margins = (data.inputs * beta).cwiseProduct(label_vector(data.pseudo_labels));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) sum += log1p_exp_neg(margins[i]);
  return sum / static_cast<double>(margins.size()) + lambda * beta.squaredNorm();
}

double logistic_step_size(const PseudoLabeledSet& data, double lambda) {
  const Eigen::Index n = data.inputs.rows();
  if (n < 1) throw AllRejectedError("logistic_step_size: no accepted samples");
  // Power iteration for the top eigenvalue of X^T X / n.
  Vector v = Vector::Ones(data.inputs.cols()) / std::sqrt(static_cast<double>(data.inputs.cols()));
  double top = 0.0;
  for (int it = 0; it < 100; ++it) {
    Vector w = data.inputs.transpose() * (data.inputs * v) / static_cast<double>(n);
    const double norm = w.norm();
    if (norm == 0.0) break;
    const double prev = top;
    top = norm;
    v = w / norm;
    if (std::abs(top - prev) <= 1e-6 * top) break;
  }
  // Hessian of the loss is bounded by X^T X/(4n) + 2 lambda I. Pad the
  // eigenvalue estimate so the step stays below 1/L.
  const double smoothness = 1.05 * top / 4.0 + 2.0 * lambda;
  if (smoothness <= 0.0) throw DegenerateModelError("logistic_step_size: zero data");
  return 1.0 / smoothness;
}

LogisticResult logistic_fit(const PseudoLabeledSet& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.accepted_count == 0 || data.inputs.rows() == 0)
    throw AllRejectedError("logistic_fit: no accepted samples");
  const double lambda = resolve_lambda(data, cfg);
  const double step = cfg.step_size ? *cfg.step_size : logistic_step_size(data, lambda);
  const Vector y = label_vector(data.pseudo_labels);
  const double n = static_cast<double>(data.inputs.rows());

  Vector beta = Vector::Zero(data.inputs.cols());
  Vector grad(beta.size());
  Vector coeff(y.size());
  int steps = 0;
  double grad_norm = 0.0;
  for (;;) {
    const Vector margins = (data.inputs * beta).cwiseProduct(y);
    for (Eigen::Index i = 0; i < y.size(); ++i) coeff[i] = -y[i] * sigmoid_neg(margins[i]);
    grad = data.inputs.transpose() * coeff / n + 2.0 * lambda * beta;
    grad_norm = grad.norm();
    if (grad_norm <= cfg.tolerance || steps >= cfg.max_steps) break;
    beta -= step * grad;
    ++steps;
  }

  bool separates = true;
  const Vector margins = (data.inputs * beta).cwiseProduct(y);
  for (Eigen::Index i = 0; i < margins.size(); ++i)
    if (margins[i] <= 0.0) separates = false;

  LogisticResult out{LinearModel(beta), lambda, steps, grad_norm, logistic_objective(data, beta, lambda),
                     grad_norm <= cfg.tolerance, lambda == 0.0 && separates};
  return out;
}

LinearModel ridge_pseudo_fit(const LinearModel& model_init, const UnlabeledSet& data, double gamma, double lambda) {
  check_nonempty(data.size(), "ridge_pseudo_fit");
  if (!(lambda >= 0.0)) throw DomainError("ridge_pseudo_fit: lambda must be >= 0");
  std::size_t accepted = 0;
  const Vector weights = acceptance_weights(model_init, data.inputs, gamma, accepted);
  if (accepted == 0) throw AllRejectedError("ridge_pseudo_fit: no sample passed the threshold");

  const Eigen::Index p = data.dim();
  Matrix kept(static_cast<Eigen::Index>(accepted), p);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    if (weights[i] != 0.0) kept.row(row++) = data.inputs.row(i);

  const double u = static_cast<double>(data.size());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(kept.transpose(), 1.0 / u);
  gram.diagonal().array() += lambda;
  const Vector rhs = weighted_mean(data.inputs, weights, u);

  Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(gram);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-13)
    throw IllPosedError("ridge_pseudo_fit: accepted second-moment matrix is singular");
  return LinearModel(llt.solve(rhs));
}

LinearModel early_stop_fit(const LinearModel& model_init, const UnlabeledSet& data, double gamma) {
  check_nonempty(data.size(), "early_stop_fit");
  std::size_t accepted = 0;
  const Vector weights = acceptance_weights(model_init, data.inputs, gamma, accepted);
  if (accepted == 0) throw AllRejectedError("early_stop_fit: no sample passed the threshold");
  return LinearModel(weighted_mean(data.inputs, weights, static_cast<double>(data.size())));
}

}  // namespace selftrain
