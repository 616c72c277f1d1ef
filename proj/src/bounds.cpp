#include "selftrain/bounds.hpp"

#include "selftrain/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace selftrain {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_lengths(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || a.size() != b.size()) throw DomainError("loss vectors must be nonempty and of equal length");
}

double min_of(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }

// P(|a y X + s g| <= gamma) for a fixed X value.
double band_given_x(double a, double s, double x, double gamma) {
  const double center = a * x;
  if (s == 0.0) return std::abs(center) <= gamma ? 1.0 : 0.0;
  return normal_cdf((gamma - center) / s) - normal_cdf((-gamma - center) / s);
}

}  // namespace

FiniteClass::FiniteClass(std::vector<LinearModel> members) : members_(std::move(members)) {
  if (members_.empty()) throw DomainError("FiniteClass: needs at least one member");
  for (const auto& m : members_)
    if (m.dim() != members_.front().dim()) throw DomainError("FiniteClass: members differ in dimension");
}

FiniteClass FiniteClass::direction_grid_2d(int K, double scale) {
  if (K < 1) throw DomainError("direction_grid_2d: K must be >= 1");
  if (!(scale > 0.0)) throw DomainError("direction_grid_2d: scale must be > 0");
  std::vector<LinearModel> m;
  for (int k = 0; k < K; ++k) {
    const double t = 2.0 * std::numbers::pi * k / K;
    Vector b(2);
    b << scale * std::cos(t), scale * std::sin(t);
    m.emplace_back(b);
  }
  return FiniteClass(std::move(m));
}

FiniteClass FiniteClass::random_dictionary(int K, int p, const SeedSpec& seed, double scale) {
  if (K < 1) throw DomainError("random_dictionary: K must be >= 1");
  if (!(scale > 0.0)) throw DomainError("random_dictionary: scale must be > 0");
  std::vector<LinearModel> m;
  for (int k = 0; k < K; ++k) {
    const Vector g = gaussian_vector(p, seed.child(static_cast<std::uint64_t>(k)));
    m.emplace_back(scale * g / g.norm());
  }
  return FiniteClass(std::move(m));
}

FiniteClass FiniteClass::scaled(double c) const {
  if (!(c > 0.0)) throw DomainError("FiniteClass::scaled: c must be > 0");
  std::vector<LinearModel> m;
  for (const auto& f : members_) m.emplace_back(c * f.beta());
  return FiniteClass(std::move(m));
}

FiniteClass FiniteClass::with_negations() const {
  std::vector<LinearModel> m = members_;
  for (const auto& f : members_) m.emplace_back(-f.beta());
  return FiniteClass(std::move(m));
}

Eigen::MatrixXd FiniteClass::evaluate(const Matrix& inputs) const {
  if (inputs.cols() != dim()) throw DomainError("FiniteClass: data dimension differs from class dimension");
  Eigen::MatrixXd B(dim(), static_cast<Eigen::Index>(size()));
  for (std::size_t k = 0; k < size(); ++k) B.col(static_cast<Eigen::Index>(k)) = members_[k].beta();
  return inputs * B;
}

double margin_loss(double x, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("margin_loss: gamma must be > 0");
  if (!(x >= 0.0)) throw DomainError("margin_loss: x must be >= 0");
  if (x <= gamma) return 1.0;
  if (x >= 2.0 * gamma) return 0.0;
  return -x / gamma + 2.0;
}

double ramp_loss(double t) { return std::min(1.0, std::max(0.0, 1.0 - t)); }

double clustering_error(const LinearModel& model, const UnlabeledSet& data, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("clustering_error: gamma must be > 0");
  if (data.size() < 1) throw DomainError("clustering_error: empty data set");
  const Vector f = data.inputs * model.beta();
  std::size_t inside = 0;
  for (Eigen::Index i = 0; i < f.size(); ++i)
    if (std::abs(f[i]) <= gamma) ++inside;
  return static_cast<double>(inside) / static_cast<double>(f.size());
}

double clustering_error(const LinearModel& model, const MixtureSpec& spec, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("clustering_error: gamma must be > 0");
  spec.validate();
  if (model.dim() != spec.p()) throw DomainError("clustering_error: model and mixture dimensions differ");
  // f(x) = y X a + s g with a = beta^T mu and s = sigma |beta|.
  const double a = model.beta().dot(spec.mu);
  const double s = spec.sigma * model.beta().norm();
  return std::visit(overloaded{[&](const ConstantOne&) { return band_given_x(a, s, 1.0, gamma); },
                               [&](const FoldedNormal&) {
                                 // yX is standard normal, so f(x) ~ N(0, a^2 + s^2).
                                 const double sd = std::sqrt(a * a + s * s);
                                 if (sd == 0.0) return 1.0;
                                 return 1.0 - 2.0 * q_tail(gamma / sd);
                               },
                               [&](const BoundedMargin& b) {
                                 const double lo = b.gamma;
                                 const double hi = b.M * b.gamma;
                                 if (hi == lo) return band_given_x(a, s, lo, gamma);
                                 constexpr int intervals = 400;
                                 const double h = (hi - lo) / intervals;
                                 double sum = band_given_x(a, s, lo, gamma) + band_given_x(a, s, hi, gamma);
                                 for (int k = 1; k < intervals; ++k)
                                   sum += (k % 2 ? 4.0 : 2.0) * band_given_x(a, s, lo + k * h, gamma);
                                 return sum * h / 3.0 / (hi - lo);
                               }},
                    spec.x_law);
}

ErmResult unsup_erm(const FiniteClass& cls, const UnlabeledSet& data, double gamma) {
  if (data.size() < 1) throw DomainError("unsup_erm: empty data set");
  const Eigen::MatrixXd F = cls.evaluate(data.inputs);
  ErmResult best{0, std::numeric_limits<double>::infinity()};
  for (Eigen::Index k = 0; k < F.cols(); ++k) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < F.rows(); ++i) sum += margin_loss(std::abs(F(i, k)), gamma);
    const double risk = sum / static_cast<double>(F.rows());
    if (risk < best.risk) best = {static_cast<std::size_t>(k), risk};
  }
  return best;
}

RademacherEstimate empirical_rademacher(const FiniteClass& cls, const UnlabeledSet& data, int sign_draws,
                                        const SeedSpec& seed) {
  if (sign_draws < 1) throw DomainError("empirical_rademacher: sign_draws must be >= 1");
  if (data.size() < 1) throw DomainError("empirical_rademacher: empty data set");
  const Eigen::MatrixXd F = cls.evaluate(data.inputs);
  const double u = static_cast<double>(F.rows());
  Rng rng(seed);
  Eigen::RowVectorXd eps(F.rows());
  double sum = 0.0;
  double sq = 0.0;
  for (int d = 0; d < sign_draws; ++d) {
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.rademacher();
    const double sup = (eps * F).maxCoeff() / u;
    sum += sup;
    sq += sup * sup;
  }
  const double n = static_cast<double>(sign_draws);
  const double mean = sum / n;
  const double var = sign_draws > 1 ? std::max(0.0, (sq - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, std::sqrt(var / n)};
}

ClusteringBoundReport clustering_bound_check(const FiniteClass& cls, const MixtureSpec& spec, double gamma,
                                             Eigen::Index u, double delta, int trials, const SeedSpec& seed,
                                             int sign_draws) {
  if (trials < 1) throw DomainError("clustering_bound_check: trials must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("clustering_bound_check: delta must lie in (0,1)");
  ClusteringBoundReport r;
  r.trials = trials;
  r.min_error_2gamma = std::numeric_limits<double>::infinity();
  for (const auto& f : cls.members()) r.min_error_2gamma = std::min(r.min_error_2gamma, clustering_error(f, spec, 2.0 * gamma));
  r.confidence_term = 2.0 * std::sqrt(std::log(2.0 / delta) / static_cast<double>(u));
  for (int t = 0; t < trials; ++t) {
    const SeedSpec trial = seed.child(static_cast<std::uint64_t>(t));
    const auto data = sample_unlabeled(spec, u, trial.child(0));
    const auto erm = unsup_erm(cls, data, gamma);
    const double err = clustering_error(cls[erm.index], spec, gamma);
    const auto rad = empirical_rademacher(cls, data, sign_draws, trial.child(1));
    const double complexity = (2.0 / gamma) * rad.estimate;
    const double rhs = r.min_error_2gamma + complexity + r.confidence_term;
    if (err > rhs) ++r.violations;
    r.mean_erm_error += err;
    r.mean_rademacher += rad.estimate;
    r.mean_complexity_term += complexity;
    r.mean_rhs += rhs;
  }
  r.mean_erm_error /= trials;
  r.mean_rademacher /= trials;
  r.mean_complexity_term /= trials;
  r.mean_rhs /= trials;
  r.violation_rate = static_cast<double>(r.violations) / trials;
  return r;
}

CommonalityReport epsilon_tilde(const std::vector<double>& pop_L, const std::vector<double>& pop_Lt, double epsilon) {
  check_lengths(pop_L, pop_Lt);
  if (!(epsilon > 0.0)) throw DomainError("epsilon_tilde: epsilon must be > 0");
  const double min_L = min_of(pop_L);
  const double min_Lt = min_of(pop_Lt);
  CommonalityReport r;
  r.epsilon = epsilon;
  r.epsilon_tilde = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pop_L.size(); ++k) {
    if (!(pop_L[k] <= min_L + epsilon)) continue;
    const double gap = pop_Lt[k] - min_Lt;
    if (gap < r.epsilon_tilde) {
      r.epsilon_tilde = gap;
      r.witness = k;
    }
  }
  return r;
}

std::size_t constrained_argmin(const std::vector<double>& L, const std::vector<double>& Lt, double Xi) {
  check_lengths(L, Lt);
  std::size_t best = L.size();
  for (std::size_t k = 0; k < L.size(); ++k) {
    if (!(Lt[k] <= Xi)) continue;
    if (best == L.size() || L[k] < L[best]) best = k;
  }
  if (best == L.size()) throw InfeasibleError("constrained ERM: no member satisfies the constraint");
  return best;
}

std::vector<double> labeled_ramp_risks(const FiniteClass& cls, const LabeledSet& data) {
  if (data.size() < 1) throw DomainError("labeled_ramp_risks: empty data set");
  const Eigen::MatrixXd F = cls.evaluate(data.inputs);
  std::vector<double> out(cls.size());
  for (Eigen::Index k = 0; k < F.cols(); ++k) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < F.rows(); ++i)
      sum += ramp_loss(data.labels[static_cast<std::size_t>(i)] * F(i, k));
    out[static_cast<std::size_t>(k)] = sum / static_cast<double>(F.rows());
  }
  return out;
}

std::vector<double> pseudo_ramp_risks(const FiniteClass& cls, const UnlabeledSet& data) {
  if (data.size() < 1) throw DomainError("pseudo_ramp_risks: empty data set");
  const Eigen::MatrixXd F = cls.evaluate(data.inputs);
  std::vector<double> out(cls.size());
  for (Eigen::Index k = 0; k < F.cols(); ++k) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < F.rows(); ++i) sum += ramp_loss(std::abs(F(i, k)));
    out[static_cast<std::size_t>(k)] = sum / static_cast<double>(F.rows());
  }
  return out;
}

ConstrainedErmResult constrained_erm(const FiniteClass& cls, const LabeledSet& labeled, const UnlabeledSet& unlabeled,
                                     double Xi) {
  const auto L = labeled_ramp_risks(cls, labeled);
  const auto Lt = pseudo_ramp_risks(cls, unlabeled);
  const std::size_t k = constrained_argmin(L, Lt, Xi);
  return {k, L[k], Lt[k]};
}

TransferReport deterministic_transfer_check(const std::vector<double>& pop_L, const std::vector<double>& pop_Lt,
                                            const std::vector<double>& emp_L, const std::vector<double>& emp_Lt,
                                            double epsilon, double delta, double xi_bar) {
  check_lengths(pop_L, pop_Lt);
  check_lengths(pop_L, emp_L);
  check_lengths(pop_L, emp_Lt);
  TransferReport r;
  r.epsilon = epsilon;
  r.delta = delta;
  r.xi_bar = xi_bar;
  r.epsilon_tilde = epsilon_tilde(pop_L, pop_Lt, epsilon).epsilon_tilde;
  r.xi_bar_ok = xi_bar >= r.epsilon_tilde + delta;

  const double min_Lt = min_of(pop_Lt);
  r.min_L = min_of(pop_L);
  r.weak_close = true;
  r.strong_close = true;
  for (std::size_t k = 0; k < pop_L.size(); ++k) {
    if (std::abs(pop_Lt[k] - emp_Lt[k]) > delta) r.weak_close = false;
    const bool in_sublevel = pop_Lt[k] <= min_Lt + xi_bar + delta;
    if (in_sublevel && std::abs(pop_L[k] - emp_L[k]) > epsilon) r.strong_close = false;
  }
  r.premises_hold = r.xi_bar_ok && r.weak_close && r.strong_close;

  try {
    r.chosen = constrained_argmin(emp_L, emp_Lt, xi_bar + min_Lt);
    r.feasible = true;
    r.chosen_L = pop_L[r.chosen];
    r.conclusion_holds = r.chosen_L <= r.min_L + 3.0 * epsilon;
  } catch (const InfeasibleError&) {
    r.feasible = false;
    r.conclusion_holds = false;
  }
  return r;
}

TransferReport random_transfer_case(const SeedSpec& seed, int K) {
  if (K < 1) throw DomainError("random_transfer_case: K must be >= 1");
  Rng rng(seed);
  const double epsilon = 0.02 + 0.18 * rng.uniform();
  const double delta = 0.01 + 0.09 * rng.uniform();
  const double spread_L = epsilon * (0.5 + 0.7 * rng.uniform());
  const double spread_Lt = delta * (0.5 + 0.7 * rng.uniform());
  std::vector<double> pop_L(K), pop_Lt(K), emp_L(K), emp_Lt(K);
  for (int k = 0; k < K; ++k) {
    pop_L[k] = rng.uniform();
    pop_Lt[k] = rng.uniform();
    emp_L[k] = pop_L[k] + spread_L * (2.0 * rng.uniform() - 1.0);
    emp_Lt[k] = pop_Lt[k] + spread_Lt * (2.0 * rng.uniform() - 1.0);
  }
  const double eps_t = epsilon_tilde(pop_L, pop_Lt, epsilon).epsilon_tilde;
  // One case in ten sits just below the admissible xi_bar.
  const double xi_bar = rng.uniform() < 0.1 ? eps_t + 0.9 * delta : eps_t + delta + 0.1 * rng.uniform();
  return deterministic_transfer_check(pop_L, pop_Lt, emp_L, emp_Lt, epsilon, delta, xi_bar);
}

void to_json(nlohmann::json& j, const ClusteringBoundReport& r) {
  j = {{"trials", r.trials},
       {"violations", r.violations},
       {"violation_rate", r.violation_rate},
       {"min_error_2gamma", r.min_error_2gamma},
       {"mean_erm_error", r.mean_erm_error},
       {"mean_rademacher", r.mean_rademacher},
       {"mean_complexity_term", r.mean_complexity_term},
       {"confidence_term", r.confidence_term},
       {"mean_rhs", r.mean_rhs}};
}

void to_json(nlohmann::json& j, const CommonalityReport& r) {
  j = {{"epsilon", r.epsilon}, {"epsilon_tilde", r.epsilon_tilde}, {"witness", r.witness}};
}

void to_json(nlohmann::json& j, const TransferReport& r) {
  j = {{"epsilon", r.epsilon},           {"delta", r.delta},
       {"xi_bar", r.xi_bar},             {"epsilon_tilde", r.epsilon_tilde},
       {"xi_bar_ok", r.xi_bar_ok},       {"weak_close", r.weak_close},
       {"strong_close", r.strong_close}, {"premises_hold", r.premises_hold},
       {"feasible", r.feasible},         {"chosen", r.chosen},
       {"chosen_L", r.chosen_L},         {"min_L", r.min_L},
       {"conclusion_holds", r.conclusion_holds}};
}

}  // namespace selftrain
