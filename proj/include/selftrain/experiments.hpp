#pragma once

// Config-driven experiment runners. Each runner fans trials out over a worker
// pool, stores every trial result at its own index and aggregates in index
// order, so output bytes do not depend on the worker count.

#include "selftrain/numerics.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace selftrain {

inline constexpr const char* library_version = "1.0.0";

struct ExperimentConfig {
  std::string experiment = "gmm_sweep";
  int p = 400;
  double n_bar = 0.05;
  std::vector<double> u_bar_grid = {0.5, 1.0, 2.0, 3.0, 5.0, 8.0};
  double sigma = 0.75;
  double gamma_threshold = 0.5;
  int tau = 3;
  int trials = 100;
  std::uint64_t master_seed = 0;
  std::string output_path = "out";

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

const std::vector<std::string>& experiment_names();

/// Parses JSON whose keys match the field names above. Missing keys keep their
/// defaults; unknown keys and ill-typed values raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
std::string emit_config(const ExperimentConfig& cfg);

struct SweepRow {
  std::string experiment;
  std::string method;
  int p = 0;
  double n_bar = 0.0;
  double u_bar = 0.0;
  double sigma = 0.0;
  double gamma_threshold = 0.0;
  int tau = 0;
  int trials = 0;
  /// accuracy, cotangent or correlation for estimator sweeps; landscape and
  /// bounds summaries use their own metric names.
  std::string metric;
  double empirical_mean = 0.0;
  double empirical_stderr = 0.0;
  std::optional<double> theory_value;
  std::optional<double> deviation;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  /// Trials that were dropped or raised a diagnostic.
  int flagged = 0;
};

struct ExperimentResult {
  std::vector<SweepRow> rows;
  /// Extra files written next to the table, keyed by file name.
  std::map<std::string, std::string> artifacts;
};

/// Runs fn(i) for i in [0, count) on up to `threads` workers. If several
/// calls throw, the exception of the lowest index is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

/// Percentile bootstrap interval for the mean of `values`.
struct BootstrapInterval {
  double low = 0.0;
  double high = 0.0;
};
BootstrapInterval bootstrap_mean_ci(const std::vector<double>& values, double level, int resamples,
                                    const SeedSpec& seed);

ExperimentResult run_gmm_sweep(const ExperimentConfig& cfg, int threads = 1);
ExperimentResult run_iterate_compare(const ExperimentConfig& cfg, int threads = 1);
ExperimentResult run_logistic_sweep(const ExperimentConfig& cfg, int threads = 1);
ExperimentResult run_landscape(const ExperimentConfig& cfg, int threads = 1);
ExperimentResult run_bounds_suite(const ExperimentConfig& cfg, int threads = 1);
ExperimentResult run_gap_fresh_vs_supervised(const ExperimentConfig& cfg, int threads = 1);

/// Validates cfg and dispatches on cfg.experiment.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1);

std::string csv_header();
std::string to_csv(const std::vector<SweepRow>& rows);

/// JSON sidecar: the config and the library version.
std::string sidecar_json(const ExperimentConfig& cfg);

/// Writes <experiment>.csv, <experiment>.json and every artifact into `dir`.
/// Returns the paths written.
std::vector<std::filesystem::path> write_outputs(const ExperimentResult& result, const ExperimentConfig& cfg,
                                                 const std::filesystem::path& dir);

}  // namespace selftrain
