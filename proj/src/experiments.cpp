#include "selftrain/experiments.hpp"

#include "selftrain/bounds.hpp"
#include "selftrain/distributions.hpp"
#include "selftrain/errors.hpp"
#include "selftrain/estimators.hpp"
#include "selftrain/landscape.hpp"
#include "selftrain/theory.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace selftrain {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

Eigen::Index scaled_count(double ratio, int p) {
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(ratio * p)));
}

// Streams reserved for harness-level randomness, disjoint from trial streams.
SeedSpec harness_seed(const ExperimentConfig& cfg, std::uint64_t index) {
  return SeedSpec{stream_seed(SeedSpec{cfg.master_seed, std::numeric_limits<std::uint64_t>::max()}), index};
}

struct Summary {
  double mean = nan_value;
  double stderr_ = nan_value;
  int used = 0;
};

Summary summarize(const std::vector<double>& values) {
  Summary s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.used = static_cast<int>(values.size());
  if (values.empty()) return s;
  s.mean = sum / s.used;
  if (s.used < 2) {
    s.stderr_ = 0.0;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stderr_ = std::sqrt(ss / (s.used - 1) / s.used);
  return s;
}

SweepRow base_row(const ExperimentConfig& cfg, const std::string& method, double u_bar, double gamma, int tau,
                  const std::string& metric) {
  SweepRow r;
  r.experiment = cfg.experiment;
  r.method = method;
  r.p = cfg.p;
  r.n_bar = cfg.n_bar;
  r.u_bar = u_bar;
  r.sigma = cfg.sigma;
  r.gamma_threshold = gamma;
  r.tau = tau;
  r.trials = cfg.trials;
  r.metric = metric;
  return r;
}

SweepRow stat_row(const ExperimentConfig& cfg, const std::string& method, double u_bar, double gamma, int tau,
                  const std::string& metric, const std::vector<double>& values, std::optional<double> theory,
                  int flagged) {
  auto r = base_row(cfg, method, u_bar, gamma, tau, metric);
  const auto s = summarize(values);
  r.empirical_mean = s.mean;
  r.empirical_stderr = s.stderr_;
  r.theory_value = theory;
  if (theory) r.deviation = s.mean - *theory;
  r.flagged = flagged;
  return r;
}

double theory_accuracy(double cot, double sigma) {
  return accuracy_from_alignment(correlation_from_cotangent(cot), sigma);
}

// Per-trial record of one schedule: accuracy and cot after each round.
struct Curve {
  std::vector<double> accuracy;
  std::vector<double> cotangent;
};

Curve curve_of(const Trajectory& t) {
  Curve c;
  for (const auto& r : t.rounds) {
    c.accuracy.push_back(r.accuracy);
    c.cotangent.push_back(r.cotangent);
  }
  return c;
}

Curve curve_of(const LinearModel& m, const MixtureSpec& spec) {
  const auto s = alignment_stats(m, spec);
  return {{s.accuracy}, {s.cotangent}};
}

std::vector<double> column(const std::vector<std::optional<Curve>>& curves, std::size_t begin, std::size_t count,
                           std::size_t round, bool accuracy, int& flagged) {
  std::vector<double> out;
  flagged = 0;
  for (std::size_t t = begin; t < begin + count; ++t) {
    const auto& c = curves[t];
    if (!c) {
      ++flagged;
      continue;
    }
    const auto& v = accuracy ? c->accuracy : c->cotangent;
    if (round < v.size()) out.push_back(v[round]);
  }
  return out;
}

LinearModel initial_model(const MixtureSpec& spec, const ExperimentConfig& cfg, const SeedSpec& trial) {
  return averaging_fit(sample_labeled(spec, scaled_count(cfg.n_bar, cfg.p), trial.child(0)));
}

// Records acc/cot rows for rounds [first, last] of a per-trial curve set.
void emit_curve_rows(std::vector<SweepRow>& rows, const ExperimentConfig& cfg, const std::string& method,
                     double u_bar, double gamma, const std::vector<std::optional<Curve>>& curves,
                     std::size_t begin, int first, int last, int tau_offset,
                     const std::function<std::optional<double>(int)>& theory_cot) {
  for (int k = first; k <= last; ++k) {
    int flagged = 0;
    const auto acc = column(curves, begin, static_cast<std::size_t>(cfg.trials), static_cast<std::size_t>(k), true,
                            flagged);
    const auto cot = column(curves, begin, static_cast<std::size_t>(cfg.trials), static_cast<std::size_t>(k), false,
                            flagged);
    const auto tc = theory_cot ? theory_cot(k) : std::nullopt;
    std::optional<double> ta;
    if (tc) ta = theory_accuracy(*tc, cfg.sigma);
    rows.push_back(stat_row(cfg, method, u_bar, gamma, k + tau_offset, "accuracy", acc, ta, flagged));
    rows.push_back(stat_row(cfg, method, u_bar, gamma, k + tau_offset, "cotangent", cot, tc, flagged));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"gmm_sweep", "iterate_compare",        "logistic_sweep",
                                                 "landscape", "bounds_suite", "gap_fresh_vs_supervised"};
  return names;
}

void ExperimentConfig::validate() const {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), experiment) == names.end())
    throw ConfigError("experiment", "unknown experiment '" + experiment + "'");
  if (p < 2) throw ConfigError("p", "must be >= 2");
  if (!(n_bar > 0.0) || !std::isfinite(n_bar)) throw ConfigError("n_bar", "must be > 0");
  if (u_bar_grid.empty()) throw ConfigError("u_bar_grid", "must be nonempty");
  for (std::size_t i = 0; i < u_bar_grid.size(); ++i) {
    if (!(u_bar_grid[i] > 0.0) || !std::isfinite(u_bar_grid[i])) throw ConfigError("u_bar_grid", "entries must be > 0");
    if (i > 0 && !(u_bar_grid[i] > u_bar_grid[i - 1])) throw ConfigError("u_bar_grid", "must be strictly ascending");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma", "must be > 0");
  if (!(gamma_threshold >= 0.0) || !std::isfinite(gamma_threshold))
    throw ConfigError("gamma_threshold", "must be >= 0");
  if (tau < 1) throw ConfigError("tau", "must be >= 1");
  if (trials < 1) throw ConfigError("trials", "must be >= 1");
  if (output_path.empty()) throw ConfigError("output_path", "must be nonempty");
}

ExperimentConfig parse_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config", "top level must be an object");
  static const std::set<std::string> known = {"experiment", "p",   "n_bar",  "u_bar_grid",  "sigma",
                                              "gamma_threshold", "tau", "trials", "master_seed", "output_path"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError(key, "unknown field");

  ExperimentConfig cfg;
  auto number = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw ConfigError(key, "must be a number");
    out = j[key].get<double>();
  };
  auto integer = [&](const char* key, int& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) throw ConfigError(key, "must be an integer");
    const auto v = j[key].get<long long>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
      throw ConfigError(key, "out of range");
    out = static_cast<int>(v);
  };
  auto text = [&](const char* key, std::string& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_string()) throw ConfigError(key, "must be a string");
    out = j[key].get<std::string>();
  };
  text("experiment", cfg.experiment);
  integer("p", cfg.p);
  number("n_bar", cfg.n_bar);
  if (j.contains("u_bar_grid")) {
    const auto& g = j["u_bar_grid"];
    if (!g.is_array()) throw ConfigError("u_bar_grid", "must be an array of numbers");
    cfg.u_bar_grid.clear();
    for (const auto& v : g) {
      if (!v.is_number()) throw ConfigError("u_bar_grid", "must be an array of numbers");
      cfg.u_bar_grid.push_back(v.get<double>());
    }
  }
  number("sigma", cfg.sigma);
  number("gamma_threshold", cfg.gamma_threshold);
  integer("tau", cfg.tau);
  integer("trials", cfg.trials);
  if (j.contains("master_seed")) {
    const auto& s = j["master_seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      throw ConfigError("master_seed", "must be a non-negative integer");
    cfg.master_seed = s.get<std::uint64_t>();
  }
  text("output_path", cfg.output_path);
  cfg.validate();
  return cfg;
}

std::string emit_config(const ExperimentConfig& cfg) {
  ordered_json j;
  j["experiment"] = cfg.experiment;
  j["p"] = cfg.p;
  j["n_bar"] = cfg.n_bar;
  j["u_bar_grid"] = cfg.u_bar_grid;
  j["sigma"] = cfg.sigma;
  j["gamma_threshold"] = cfg.gamma_threshold;
  j["tau"] = cfg.tau;
  j["trials"] = cfg.trials;
  j["master_seed"] = cfg.master_seed;
  j["output_path"] = cfg.output_path;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Harness utilities

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
  std::vector<std::exception_ptr> errors(count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

BootstrapInterval bootstrap_mean_ci(const std::vector<double>& values, double level, int resamples,
                                    const SeedSpec& seed) {
  if (values.empty()) throw DomainError("bootstrap_mean_ci: no values");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("bootstrap_mean_ci: level must lie in (0,1)");
  if (resamples < 2) throw DomainError("bootstrap_mean_ci: resamples must be >= 2");
  Rng rng(seed);
  const std::size_t n = values.size();
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += values[rng.index(n)];
    m = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double tail = 0.5 * (1.0 - level);
  const auto lo = static_cast<std::size_t>(std::floor(tail * (resamples - 1)));
  const auto hi = static_cast<std::size_t>(std::ceil((1.0 - tail) * (resamples - 1)));
  return {means[lo], means[hi]};
}

// ---------------------------------------------------------------------------
// Runners

namespace {

void require_experiment(const ExperimentConfig& cfg, const std::string& name) {
  cfg.validate();
  if (cfg.experiment != name) throw ConfigError("experiment", "expected '" + name + "', got '" + cfg.experiment + "'");
}

}  // namespace

ExperimentResult run_gmm_sweep(const ExperimentConfig& cfg, int threads) {
  require_experiment(cfg, "gmm_sweep");
  const auto spec = MixtureSpec::binary_gmm(cfg.p, cfg.sigma);
  const std::size_t T = static_cast<std::size_t>(cfg.trials);
  const std::size_t G = cfg.u_bar_grid.size();
  std::vector<std::optional<Curve>> curves(G * T);
  parallel_for(G * T, threads, [&](std::size_t i) {
    const double u_bar = cfg.u_bar_grid[i / T];
    const SeedSpec trial{cfg.master_seed, i};
    try {
      const auto init = initial_model(spec, cfg, trial);
      curves[i] = curve_of(
          iterate_fresh(init, spec, scaled_count(u_bar, cfg.p), cfg.gamma_threshold, cfg.tau, trial.child(1)));
    } catch (const AllRejectedError&) {
    } catch (const DegenerateModelError&) {
    }
  });

  ExperimentResult out;
  for (std::size_t g = 0; g < G; ++g) {
    const double u_bar = cfg.u_bar_grid[g];
    auto theory = [&](int k) -> std::optional<double> {
      return iterate_prediction(cfg.n_bar, u_bar, cfg.sigma, cfg.gamma_threshold, k);
    };
    emit_curve_rows(out.rows, cfg, "supervised_init", u_bar, cfg.gamma_threshold, curves, g * T, 0, 0, 0, theory);
    emit_curve_rows(out.rows, cfg, "fresh_st", u_bar, cfg.gamma_threshold, curves, g * T, 1, cfg.tau, 0, theory);
  }
  return out;
}

ExperimentResult run_iterate_compare(const ExperimentConfig& cfg, int threads) {
  require_experiment(cfg, "iterate_compare");
  constexpr int reuse_rounds = 20;
  const auto spec = MixtureSpec::binary_gmm(cfg.p, cfg.sigma);
  const double Gamma = cfg.gamma_threshold;
  const std::size_t T = static_cast<std::size_t>(cfg.trials);
  const std::size_t G = cfg.u_bar_grid.size();
  std::vector<std::optional<Curve>> fresh(G * T), supervised(G * T), reuse(G * T);
  std::vector<double> fixed_point(G * T, nan_value);
  parallel_for(G * T, threads, [&](std::size_t i) {
    const double u_bar = cfg.u_bar_grid[i / T];
    const Eigen::Index u = scaled_count(u_bar, cfg.p);
    const SeedSpec trial{cfg.master_seed, i};
    try {
      const auto init = initial_model(spec, cfg, trial);
      fresh[i] = curve_of(iterate_fresh(init, spec, u, Gamma, cfg.tau, trial.child(1)));
      // Labels of the first fresh batch: the supervised model sees the same inputs.
      supervised[i] = curve_of(averaging_fit(sample_labeled(spec, u, trial.child(1).child(1))), spec);
      const auto traj = iterate_reuse(init, sample_unlabeled(spec, u, trial.child(2)), Gamma, reuse_rounds, spec);
      reuse[i] = curve_of(traj);
      fixed_point[i] = traj.rounds.back().step_correlation;
    } catch (const AllRejectedError&) {
    } catch (const DegenerateModelError&) {
    }
  });

  ExperimentResult out;
  for (std::size_t g = 0; g < G; ++g) {
    const double u_bar = cfg.u_bar_grid[g];
    const std::size_t b = g * T;
    auto fresh_theory = [&](int k) -> std::optional<double> {
      return iterate_prediction(cfg.n_bar, u_bar, cfg.sigma, Gamma, k);
    };
    auto sup_theory = [&](int) -> std::optional<double> { return supervised_cot(u_bar, cfg.sigma); };
    emit_curve_rows(out.rows, cfg, "supervised_init", u_bar, Gamma, fresh, b, 0, 0, 0, fresh_theory);
    emit_curve_rows(out.rows, cfg, "supervised_u", u_bar, Gamma, supervised, b, 0, 0, 0, sup_theory);
    emit_curve_rows(out.rows, cfg, "self_train_once", u_bar, Gamma, fresh, b, 1, 1, 0, fresh_theory);
    emit_curve_rows(out.rows, cfg, "fresh_st", u_bar, Gamma, fresh, b, cfg.tau, cfg.tau, 0, fresh_theory);
    emit_curve_rows(out.rows, cfg, "iterative_st", u_bar, Gamma, reuse, b, reuse_rounds, reuse_rounds, 0, nullptr);
    std::vector<double> step;
    int flagged = 0;
    for (std::size_t t = b; t < b + T; ++t) {
      if (std::isnan(fixed_point[t]))
        ++flagged;
      else
        step.push_back(fixed_point[t]);
    }
    out.rows.push_back(
        stat_row(cfg, "iterative_st_step", u_bar, Gamma, reuse_rounds, "correlation", step, std::nullopt, flagged));
  }
  return out;
}

ExperimentResult run_logistic_sweep(const ExperimentConfig& cfg, int threads) {
  require_experiment(cfg, "logistic_sweep");
  const std::vector<double> gammas = {0.0, 0.5};
  const auto spec = MixtureSpec::binary_gmm(cfg.p, cfg.sigma);
  const std::size_t T = static_cast<std::size_t>(cfg.trials);
  const std::size_t G = cfg.u_bar_grid.size();
  const std::size_t S = gammas.size();
  TrainConfig train;
  train.max_steps = 1000;
  train.tolerance = 1e-4;

  // Per (grid, trial): one curve per (Gamma, schedule, estimator).
  struct TrialOut {
    std::vector<std::optional<Curve>> avg_fresh, log_fresh, avg_reuse, log_reuse;
    std::optional<Curve> supervised;
    int unconverged = 0;
  };
  std::vector<TrialOut> res(G * T);
  parallel_for(G * T, threads, [&](std::size_t i) {
    const double u_bar = cfg.u_bar_grid[i / T];
    const Eigen::Index u = scaled_count(u_bar, cfg.p);
    const SeedSpec trial{cfg.master_seed, i};
    TrialOut& r = res[i];
    r.avg_fresh.resize(S);
    r.log_fresh.resize(S);
    r.avg_reuse.resize(S);
    r.log_reuse.resize(S);
    std::optional<LinearModel> init;
    try {
      init = initial_model(spec, cfg, trial);
      r.supervised = curve_of(averaging_fit(sample_labeled(spec, u, trial.child(1).child(1))), spec);
    } catch (const DegenerateModelError&) {
      return;
    }
    for (std::size_t s = 0; s < S; ++s) {
      const double Gamma = gammas[s];
      const SeedSpec fresh_seed = trial.child(1 + s);
      auto logistic_round = [&](const LinearModel& m, const UnlabeledSet& batch) {
        const auto fit = logistic_fit(pseudo_label_select(m, batch, Gamma), train);
        if (!fit.converged) ++r.unconverged;
        return fit.model;
      };
      try {
        r.avg_fresh[s] = curve_of(iterate_fresh(*init, spec, u, Gamma, cfg.tau, fresh_seed));
      } catch (const Error&) {
      }
      try {
        Curve c = curve_of(*init, spec);
        LinearModel m = *init;
        for (int k = 1; k <= cfg.tau; ++k) {
          m = logistic_round(m, sample_unlabeled(spec, u, fresh_seed.child(static_cast<std::uint64_t>(k))));
          const auto st = alignment_stats(m, spec, k);
          c.accuracy.push_back(st.accuracy);
          c.cotangent.push_back(st.cotangent);
        }
        r.log_fresh[s] = c;
      } catch (const Error&) {
      }
      const auto fixed = sample_unlabeled(spec, u, trial.child(10 + s));
      try {
        r.avg_reuse[s] = curve_of(iterate_reuse(*init, fixed, Gamma, cfg.tau, spec));
      } catch (const Error&) {
      }
      try {
        Curve c = curve_of(*init, spec);
        LinearModel m = *init;
        for (int k = 1; k <= cfg.tau; ++k) {
          m = logistic_round(m, fixed);
          const auto st = alignment_stats(m, spec, k);
          c.accuracy.push_back(st.accuracy);
          c.cotangent.push_back(st.cotangent);
        }
        r.log_reuse[s] = c;
      } catch (const Error&) {
      }
    }
  });

  ExperimentResult out;
  for (std::size_t g = 0; g < G; ++g) {
    const double u_bar = cfg.u_bar_grid[g];
    const std::size_t b = g * T;
    int unconverged = 0;
    for (std::size_t t = b; t < b + T; ++t) unconverged += res[t].unconverged;
    std::vector<std::optional<Curve>> sup(T);
    for (std::size_t t = 0; t < T; ++t) sup[t] = res[b + t].supervised;
    auto sup_theory = [&](int) -> std::optional<double> { return supervised_cot(u_bar, cfg.sigma); };
    emit_curve_rows(out.rows, cfg, "supervised_u", u_bar, 0.0, sup, 0, 0, 0, 0, sup_theory);
    for (std::size_t s = 0; s < S; ++s) {
      const double Gamma = gammas[s];
      std::vector<std::optional<Curve>> af(T), lf(T), ar(T), lr(T);
      for (std::size_t t = 0; t < T; ++t) {
        af[t] = res[b + t].avg_fresh[s];
        lf[t] = res[b + t].log_fresh[s];
        ar[t] = res[b + t].avg_reuse[s];
        lr[t] = res[b + t].log_reuse[s];
      }
      auto theory = [&](int k) -> std::optional<double> {
        return iterate_prediction(cfg.n_bar, u_bar, cfg.sigma, Gamma, k);
      };
      emit_curve_rows(out.rows, cfg, "averaging_fresh", u_bar, Gamma, af, 0, 1, cfg.tau, 0, theory);
      const std::size_t first_log = out.rows.size();
      emit_curve_rows(out.rows, cfg, "logistic_fresh", u_bar, Gamma, lf, 0, 1, cfg.tau, 0, nullptr);
      emit_curve_rows(out.rows, cfg, "averaging_reuse", u_bar, Gamma, ar, 0, cfg.tau, cfg.tau, 0, nullptr);
      emit_curve_rows(out.rows, cfg, "logistic_reuse", u_bar, Gamma, lr, 0, cfg.tau, cfg.tau, 0, nullptr);
      // Unconverged logistic fits are reported on the logistic rows.
      for (std::size_t k = first_log; k < out.rows.size(); ++k)
        if (out.rows[k].method.rfind("logistic", 0) == 0) out.rows[k].flagged += unconverged;
    }
  }
  return out;
}

ExperimentResult run_gap_fresh_vs_supervised(const ExperimentConfig& cfg, int threads) {
  require_experiment(cfg, "gap_fresh_vs_supervised");
  constexpr int resamples = 2000;
  const auto spec = MixtureSpec::binary_gmm(cfg.p, cfg.sigma);
  const double Gamma = cfg.gamma_threshold;
  const std::size_t T = static_cast<std::size_t>(cfg.trials);
  const std::size_t G = cfg.u_bar_grid.size();
  // gaps[i][k-1] = acc(Fresh-ST(k)) - acc(supervised with u labels)
  std::vector<std::optional<std::vector<double>>> gaps(G * T);
  parallel_for(G * T, threads, [&](std::size_t i) {
    const double u_bar = cfg.u_bar_grid[i / T];
    const Eigen::Index u = scaled_count(u_bar, cfg.p);
    const SeedSpec trial{cfg.master_seed, i};
    try {
      const auto init = initial_model(spec, cfg, trial);
      const auto traj = iterate_fresh(init, spec, u, Gamma, cfg.tau, trial.child(1));
      const auto sup = alignment_stats(averaging_fit(sample_labeled(spec, u, trial.child(1).child(1))), spec);
      std::vector<double> d;
      for (int k = 1; k <= cfg.tau; ++k) d.push_back(traj.rounds[static_cast<std::size_t>(k)].accuracy - sup.accuracy);
      gaps[i] = d;
    } catch (const AllRejectedError&) {
    } catch (const DegenerateModelError&) {
    }
  });

  ExperimentResult out;
  for (std::size_t g = 0; g < G; ++g) {
    const double u_bar = cfg.u_bar_grid[g];
    for (int k = 1; k <= cfg.tau; ++k) {
      std::vector<double> d;
      int flagged = 0;
      for (std::size_t t = g * T; t < (g + 1) * T; ++t) {
        if (!gaps[t])
          ++flagged;
        else
          d.push_back((*gaps[t])[static_cast<std::size_t>(k - 1)]);
      }
      const double theory = theory_accuracy(iterate_prediction(cfg.n_bar, u_bar, cfg.sigma, Gamma, k), cfg.sigma) -
                            theory_accuracy(supervised_cot(u_bar, cfg.sigma), cfg.sigma);
      auto row = stat_row(cfg, "fresh_st_minus_supervised", u_bar, Gamma, k, "accuracy", d, theory, flagged);
      if (!d.empty()) {
        const auto ci = bootstrap_mean_ci(d, 0.95, resamples,
                                          harness_seed(cfg, g * static_cast<std::size_t>(cfg.tau) + (k - 1)));
        row.ci_low = ci.low;
        row.ci_high = ci.high;
      }
      out.rows.push_back(row);
    }
  }
  return out;
}

ExperimentResult run_landscape(const ExperimentConfig& cfg, int threads) {
  require_experiment(cfg, "landscape");
  const XLaw law = ConstantOne{};
  const double sigma = cfg.sigma;
  const auto grid = default_grid();
  const std::size_t mc = default_mc_samples;
  const SeedSpec seed{cfg.master_seed, 0};
  std::vector<double> gammas = {0.0, 1.0};
  if (std::find(gammas.begin(), gammas.end(), cfg.gamma_threshold) == gammas.end())
    gammas.push_back(cfg.gamma_threshold);

  struct Task {
    std::string name;
    std::function<RayScan()> run;
  };
  std::vector<Task> tasks;
  tasks.push_back({"supervised", [&] { return supervised_loss_ray(law, sigma, grid); }});
  for (double G : gammas) {
    const std::string tag = "gamma_" + fmt(G);
    tasks.push_back({"unsupervised_" + tag, [&, G] { return unsupervised_loss_ray(law, sigma, G, grid, mc, seed); }});
    tasks.push_back({"gradient_norm_unsupervised_" + tag,
                     [&, G] { return gradient_norm_ray(RayKind::unsupervised, law, sigma, G, grid, mc, seed); }});
  }
  tasks.push_back({"gradient_norm_supervised",
                   [&] { return gradient_norm_ray(RayKind::supervised, law, sigma, 0.0, grid, mc, seed); }});
  tasks.push_back({"semisup_regularized_rho_0.8", [&] {
                     return semisup_ray({0.8, 0.0, 0.0}, RayKind::semisup_regularized, law, sigma, grid, mc, seed);
                   }});
  tasks.push_back({"semisup_constraint_xi_0.3", [&] {
                     return semisup_ray({0.0, 0.3, 0.0}, RayKind::semisup_constraint_indicator, law, sigma, grid, mc,
                                        seed);
                   }});
  tasks.push_back({"scale_decay_logistic", [&] {
                     std::vector<double> a = {0.0};
                     for (int k = 0; k <= 50; ++k) a.push_back(std::pow(10.0, -2.0 + 5.0 * k / 50.0));
                     return scale_decay_curve(LinearModel(MixtureSpec::binary_gmm(cfg.p, sigma).mu),
                                              MixtureSpec::binary_gmm(cfg.p, sigma), ClassificationLoss::logistic, a,
                                              mc, seed);
                   }});

  std::vector<std::optional<RayScan>> scans(tasks.size());
  parallel_for(tasks.size(), threads, [&](std::size_t i) { scans[i] = tasks[i].run(); });

  ExperimentResult out;
  const double beta_star = law_mean(law) / (law_second_moment(law) + sigma * sigma);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& scan = *scans[i];
    std::ostringstream csv;
    write_csv(csv, scan);
    out.artifacts["landscape_" + tasks[i].name + ".csv"] = csv.str();
    const bool loss_kind = scan.kind == RayKind::supervised || scan.kind == RayKind::unsupervised ||
                           scan.kind == RayKind::semisup_regularized;
    if (!loss_kind) continue;
    // Minimizer over positive alpha, compared with the supervised minimizer.
    std::size_t best = scan.alphas.size();
    for (std::size_t k = 0; k < scan.alphas.size(); ++k) {
      if (scan.alphas[k] <= 0.0 || scan.flagged[k]) continue;
      if (best == scan.alphas.size() || scan.values[k] < scan.values[best]) best = k;
    }
    auto row = base_row(cfg, tasks[i].name, 0.0, 0.0, 0, "positive_minimizer");
    row.trials = 1;
    if (best < scan.alphas.size()) row.empirical_mean = scan.alphas[best];
    row.empirical_stderr = 0.0;
    row.theory_value = beta_star;
    row.deviation = row.empirical_mean - beta_star;
    out.rows.push_back(row);
  }
  return out;
}

ExperimentResult run_bounds_suite(const ExperimentConfig& cfg, int threads) {
  require_experiment(cfg, "bounds_suite");
  constexpr int directions = 36;
  constexpr double gamma = 0.25;
  constexpr Eigen::Index u = 500;
  constexpr double delta = 0.1;
  constexpr int transfer_cases = 1000;
  constexpr int transfer_members = 50;
  const auto cls = FiniteClass::direction_grid_2d(directions);
  const auto spec = MixtureSpec::binary_gmm(2, cfg.sigma);

  ClusteringBoundReport clustering;
  std::vector<TransferReport> cases(transfer_cases);
  parallel_for(1 + transfer_cases, threads, [&](std::size_t i) {
    if (i == 0)
      clustering = clustering_bound_check(cls, spec, gamma, u, delta, cfg.trials, SeedSpec{cfg.master_seed, 0});
    else
      cases[i - 1] = random_transfer_case(SeedSpec{cfg.master_seed, 1}.child(i - 1), transfer_members);
  });

  int premises = 0, bad = 0;
  for (const auto& c : cases) {
    if (!c.premises_hold) continue;
    ++premises;
    if (!c.conclusion_holds) ++bad;
  }

  ExperimentResult out;
  auto r1 = base_row(cfg, "clustering_bound_check", static_cast<double>(u) / 2.0, gamma, 0, "violation_rate");
  r1.p = 2;
  r1.empirical_mean = clustering.violation_rate;
  r1.empirical_stderr = std::sqrt(clustering.violation_rate * (1.0 - clustering.violation_rate) / cfg.trials);
  r1.theory_value = delta;
  r1.deviation = clustering.violation_rate - delta;
  out.rows.push_back(r1);

  auto r2 = base_row(cfg, "deterministic_transfer_check", 0.0, 0.0, 0, "pass_rate");
  r2.trials = transfer_cases;
  r2.empirical_mean = premises > 0 ? 1.0 - static_cast<double>(bad) / premises : nan_value;
  r2.empirical_stderr = 0.0;
  r2.theory_value = 1.0;
  r2.deviation = r2.empirical_mean - 1.0;
  r2.flagged = transfer_cases - premises;
  out.rows.push_back(r2);

  nlohmann::ordered_json report;
  report["clustering_bound_check"] = nlohmann::json(clustering);
  report["clustering_bound_check_setup"] = {
      {"directions", directions}, {"p", 2}, {"u", u}, {"gamma", gamma}, {"delta", delta}, {"sigma", cfg.sigma}};
  report["deterministic_transfer_check"] = {{"cases", transfer_cases},
                                            {"members", transfer_members},
                                            {"premises_hold", premises},
                                            {"premises_hold_conclusion_fails", bad}};
  out.artifacts["bounds_suite_report.json"] = report.dump(2) + "\n";
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads) {
  cfg.validate();
  if (cfg.experiment == "gmm_sweep") return run_gmm_sweep(cfg, threads);
  if (cfg.experiment == "iterate_compare") return run_iterate_compare(cfg, threads);
  if (cfg.experiment == "logistic_sweep") return run_logistic_sweep(cfg, threads);
  if (cfg.experiment == "landscape") return run_landscape(cfg, threads);
  if (cfg.experiment == "bounds_suite") return run_bounds_suite(cfg, threads);
  return run_gap_fresh_vs_supervised(cfg, threads);
}

// ---------------------------------------------------------------------------
// Output

std::string csv_header() {
  return "experiment,method,p,n_bar,u_bar,sigma,gamma_threshold,tau,trials,metric,empirical_mean,"
         "empirical_stderr,theory_value,deviation,ci_low,ci_high,flagged";
}

std::string to_csv(const std::vector<SweepRow>& rows) {
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) {
    out += r.experiment + ',' + r.method + ',' + std::to_string(r.p) + ',' + fmt(r.n_bar) + ',' + fmt(r.u_bar) + ',' +
           fmt(r.sigma) + ',' + fmt(r.gamma_threshold) + ',' + std::to_string(r.tau) + ',' +
           std::to_string(r.trials) + ',' + r.metric + ',' + fmt(r.empirical_mean) + ',' +
           fmt(r.empirical_stderr) + ',' + fmt(r.theory_value) + ',' + fmt(r.deviation) + ',' + fmt(r.ci_low) +
           ',' + fmt(r.ci_high) + ',' + std::to_string(r.flagged) + '\n';
  }
  return out;
}

std::string sidecar_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["library"] = "selftrain";
  j["version"] = library_version;
  j["config"] = ordered_json::parse(emit_config(cfg));
  return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> write_outputs(const ExperimentResult& result, const ExperimentConfig& cfg,
                                                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& content) {
    const auto path = dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << content;
    if (!f) throw Error("failed writing " + path.string());
    written.push_back(path);
  };
  put(cfg.experiment + ".csv", to_csv(result.rows));
  put(cfg.experiment + ".json", sidecar_json(cfg));
  for (const auto& [name, content] : result.artifacts) put(name, content);
  return written;
}

}  // namespace selftrain
