#include "selftrain/landscape.hpp"

#include "selftrain/errors.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace selftrain {

namespace {

constexpr std::size_t min_mc_samples = 1000;

void check_grid(const std::vector<double>& alphas) {
  if (alphas.empty()) throw DomainError("ray scan: empty grid");
  for (std::size_t i = 1; i < alphas.size(); ++i)
    if (!(alphas[i] > alphas[i - 1])) throw DomainError("ray scan: grid must be strictly increasing");
}

void check_mc(std::size_t mc_samples) {
  if (mc_samples < min_mc_samples) throw DomainError("ray scan: mc_samples must be >= 1000");
}

// |w| for w = yX + sigma g, drawn per sample as y, X, g.
std::vector<double> ray_magnitudes(const XLaw& law, double sigma, std::size_t count, const SeedSpec& seed) {
  Rng rng(seed);
  std::vector<double> out(count);
  for (auto& v : out) {
    const int y = rng.rademacher();
    const double x = sample_law(law, rng);
    v = std::abs(y * x + sigma * rng.normal());
  }
  return out;
}

struct RatioPoint {
  double value = 0.0;
  double std_error = 0.0;
  bool flagged = false;
};

// (1/2) mean of (1 - |alpha| t)^2 over accepted t, with delta-method error.
RatioPoint unsup_point(const std::vector<double>& mags, double alpha, double Gamma) {
  if (alpha == 0.0) {
    // beta = 0: every sample is accepted with pseudo-label sgn(0) = +1.
    return {0.5, 0.0, false};
  }
  const double a = std::abs(alpha);
  double sum = 0.0;
  std::size_t accepted = 0;
  for (double t : mags) {
    if (t < Gamma) continue;
    const double r = 1.0 - a * t;
    sum += 0.5 * r * r;
    ++accepted;
  }
  const double share = static_cast<double>(accepted) / static_cast<double>(mags.size());
  if (accepted < 2) return {0.0, 0.0, true};
  const double mean = sum / static_cast<double>(accepted);
  double ss = 0.0;
  for (double t : mags) {
    if (t < Gamma) continue;
    const double r = 1.0 - a * t;
    const double d = 0.5 * r * r - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss) / static_cast<double>(accepted), share < min_acceptance};
}

double supervised_value(const XLaw& law, double sigma, double alpha) {
  const double m2 = law_second_moment(law) + sigma * sigma;
  return 0.5 * (m2 * alpha * alpha - 2.0 * law_mean(law) * alpha + 1.0);
}

double grid_step(const std::vector<double>& alphas) {
  if (alphas.size() < 2) return 1e-3;
  double step = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < alphas.size(); ++i) step = std::min(step, alphas[i] - alphas[i - 1]);
  return step;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string ray_kind_name(RayKind kind) {
  switch (kind) {
    case RayKind::supervised: return "supervised";
    case RayKind::unsupervised: return "unsupervised";
    case RayKind::semisup_regularized: return "semisup_regularized";
    case RayKind::semisup_constraint_indicator: return "semisup_constraint_indicator";
    case RayKind::gradient_norm_supervised: return "gradient_norm_supervised";
    case RayKind::gradient_norm_unsupervised: return "gradient_norm_unsupervised";
    case RayKind::scale_decay: return "scale_decay";
  }
  return "unknown";
}

std::vector<double> linear_grid(double lo, double hi, std::size_t count) {
  if (count < 2 || !(hi > lo)) throw DomainError("linear_grid: need count >= 2 and hi > lo");
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return g;
}

std::vector<double> default_grid() { return linear_grid(-3.0, 3.0, default_grid_points); }

RayScan supervised_loss_ray(const XLaw& law, double sigma, const std::vector<double>& alphas) {
  check_grid(alphas);
  RayScan s;
  s.kind = RayKind::supervised;
  s.alphas = alphas;
  for (double a : alphas) s.values.push_back(supervised_value(law, sigma, a));
  s.std_errors.assign(alphas.size(), 0.0);
  s.flagged.assign(alphas.size(), false);
  return s;
}

RayScan unsupervised_loss_ray(const XLaw& law, double sigma, double Gamma, const std::vector<double>& alphas,
                              std::size_t mc_samples, const SeedSpec& seed) {
  check_grid(alphas);
  check_mc(mc_samples);
  if (!(Gamma >= 0.0)) throw DomainError("unsupervised_loss_ray: Gamma must be >= 0");
  const auto mags = ray_magnitudes(law, sigma, mc_samples, seed);
  RayScan s;
  s.kind = RayKind::unsupervised;
  s.alphas = alphas;
  for (double a : alphas) {
    const auto pt = unsup_point(mags, a, Gamma);
    s.values.push_back(pt.value);
    s.std_errors.push_back(pt.std_error);
    s.flagged.push_back(pt.flagged);
  }
  return s;
}

RayScan semisup_ray(const SemiSupSpec& spec, RayKind kind, const XLaw& law, double sigma,
                    const std::vector<double>& alphas, std::size_t mc_samples, const SeedSpec& seed) {
  if (!(spec.mix_rho >= 0.0 && spec.mix_rho <= 1.0)) throw DomainError("semisup_ray: mix_rho must lie in [0,1]");
  if (!(spec.constraint_xi >= 0.0)) throw DomainError("semisup_ray: constraint_xi must be >= 0");
  const auto sup = supervised_loss_ray(law, sigma, alphas);
  const auto unsup = unsupervised_loss_ray(law, sigma, spec.Gamma, alphas, mc_samples, seed);
  RayScan s;
  s.kind = kind;
  s.alphas = alphas;
  s.flagged = unsup.flagged;
  if (kind == RayKind::semisup_regularized) {
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      s.values.push_back(spec.mix_rho == 0.0 ? sup.values[i]
                                             : (1.0 - spec.mix_rho) * sup.values[i] + spec.mix_rho * unsup.values[i]);
      s.std_errors.push_back(spec.mix_rho * unsup.std_errors[i]);
    }
  } else if (kind == RayKind::semisup_constraint_indicator) {
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      s.values.push_back(unsup.values[i] <= spec.constraint_xi ? 1.0 : 0.0);
      s.std_errors.push_back(0.0);
    }
  } else {
    throw DomainError("semisup_ray: kind must be a semisup kind");
  }
  return s;
}

RayScan gradient_norm_ray(RayKind kind, const XLaw& law, double sigma, double Gamma,
                          const std::vector<double>& alphas, std::size_t mc_samples, const SeedSpec& seed) {
  check_grid(alphas);
  const double h = 0.5 * grid_step(alphas);
  RayScan s;
  s.alphas = alphas;
  if (kind == RayKind::supervised || kind == RayKind::gradient_norm_supervised) {
    s.kind = RayKind::gradient_norm_supervised;
    for (double a : alphas) {
      const double g = (supervised_value(law, sigma, a + h) - supervised_value(law, sigma, a - h)) / (2.0 * h);
      s.signed_gradient.push_back(g);
      s.values.push_back(std::abs(g));
      s.std_errors.push_back(0.0);
      s.flagged.push_back(false);
    }
  } else if (kind == RayKind::unsupervised || kind == RayKind::gradient_norm_unsupervised) {
    check_mc(mc_samples);
    s.kind = RayKind::gradient_norm_unsupervised;
    const auto mags = ray_magnitudes(law, sigma, mc_samples, seed);
    for (double a : alphas) {
      const auto hi = unsup_point(mags, a + h, Gamma);
      const auto lo = unsup_point(mags, a - h, Gamma);
      const double g = (hi.value - lo.value) / (2.0 * h);
      s.signed_gradient.push_back(g);
      s.values.push_back(std::abs(g));
      // Conservative: treats the two ends as independent.
      s.std_errors.push_back(std::hypot(hi.std_error, lo.std_error) / (2.0 * h));
      s.flagged.push_back(hi.flagged || lo.flagged);
    }
  } else {
    throw DomainError("gradient_norm_ray: kind must be supervised or unsupervised");
  }
  return s;
}

double classification_loss(ClassificationLoss loss, double t) {
  switch (loss) {
    case ClassificationLoss::logistic: return t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
    case ClassificationLoss::exponential: return std::exp(-t);
  }
  return 0.0;
}

RayScan scale_decay_curve(const LinearModel& model, const MixtureSpec& spec, ClassificationLoss loss,
                          const std::vector<double>& alphas, std::size_t mc_samples, const SeedSpec& seed) {
  check_grid(alphas);
  check_mc(mc_samples);
  spec.validate();
  // For unit-norm beta, beta^T x = y X (beta^T mu) + sigma N(0,1).
  const double c = model.beta().dot(spec.mu) / model.beta().norm();
  Rng rng(seed);
  std::vector<double> mags(mc_samples);
  for (auto& v : mags) {
    const int y = rng.rademacher();
    const double x = sample_law(spec.x_law, rng);
    v = std::abs(y * x * c + spec.sigma * rng.normal());
  }
  RayScan s;
  s.kind = RayKind::scale_decay;
  s.alphas = alphas;
  const double n = static_cast<double>(mc_samples);
  for (double a : alphas) {
    if (a == 0.0) {
      // Every sample sits at l(0).
      s.values.push_back(classification_loss(loss, 0.0));
      s.std_errors.push_back(0.0);
      s.flagged.push_back(false);
      continue;
    }
    double sum = 0.0;
    double sq = 0.0;
    for (double t : mags) {
      const double l = classification_loss(loss, a * t);
      sum += l;
      sq += l * l;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sq / n - mean * mean);
    s.values.push_back(mean);
    s.std_errors.push_back(std::sqrt(var / n));
    s.flagged.push_back(false);
  }
  return s;
}

void write_csv(std::ostream& out, const RayScan& scan) {
  out << "alpha,value,std_error,flagged\n";
  for (std::size_t i = 0; i < scan.alphas.size(); ++i)
    out << format_double(scan.alphas[i]) << ',' << format_double(scan.values[i]) << ','
        << format_double(scan.std_errors[i]) << ',' << (scan.flagged[i] ? 1 : 0) << '\n';
}

std::size_t argmin_index(const RayScan& scan) {
  std::size_t best = scan.values.size();
  for (std::size_t i = 0; i < scan.values.size(); ++i) {
    if (scan.flagged[i]) continue;
    if (best == scan.values.size() || scan.values[i] < scan.values[best]) best = i;
  }
  if (best == scan.values.size()) throw DomainError("argmin_index: every point is flagged");
  return best;
}

std::vector<double> zero_crossings(const std::vector<double>& alphas, const std::vector<double>& values,
                                   bool rising_only) {
  std::vector<double> out;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double a = values[i - 1];
    const double b = values[i];
    if (a == 0.0 && i > 1) continue;  // counted at the previous step
    const bool rising = a < 0.0 && b >= 0.0;
    const bool falling = a > 0.0 && b <= 0.0;
    if (!(rising || (falling && !rising_only))) continue;
    const double t = a / (a - b);
    out.push_back(alphas[i - 1] + t * (alphas[i] - alphas[i - 1]));
  }
  return out;
}

}  // namespace selftrain
