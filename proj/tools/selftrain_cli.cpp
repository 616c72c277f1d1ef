// Command-line front end: one subcommand per experiment.
//
//   selftrain <experiment> [--config FILE] [--seed N] [--out DIR] [--trials N] [--threads N]
//   selftrain show-config [--config FILE]
//
// Exit codes: 0 success, 1 usage error, 2 invalid configuration, 3 runtime failure.

#include "selftrain/errors.hpp"
#include "selftrain/experiments.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> trials;
  int threads = 1;
};

selftrain::ExperimentConfig load(const Options& opt, const std::string& experiment) {
  selftrain::ExperimentConfig cfg;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw selftrain::ConfigError("config", "cannot read " + opt.config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = selftrain::parse_config(buf.str());
  }
  if (!experiment.empty()) cfg.experiment = experiment;
  if (opt.seed) cfg.master_seed = *opt.seed;
  if (opt.out) cfg.output_path = *opt.out;
  if (opt.trials) cfg.trials = *opt.trials;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", opt.seed, "master seed");
  cmd->add_option("--out", opt.out, "output directory");
  cmd->add_option("--trials", opt.trials, "trials per grid point");
  cmd->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-training experiments on Gaussian-mixture data"};
  app.set_version_flag("--version", std::string(selftrain::library_version));
  app.require_subcommand(1);

  Options opt;
  std::string chosen;
  for (const auto& name : selftrain::experiment_names()) {
    auto* cmd = app.add_subcommand(name, "run the " + name + " experiment");
    add_common(cmd, opt);
    cmd->callback([&chosen, name] { chosen = name; });
  }
  auto* show = app.add_subcommand("show-config", "print the effective configuration");
  add_common(show, opt);
  bool show_only = false;
  show->callback([&show_only] { show_only = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const auto cfg = load(opt, chosen);
    if (show_only) {
      std::cout << selftrain::emit_config(cfg) << '\n';
      return 0;
    }
    const auto result = selftrain::run_experiment(cfg, opt.threads);
    for (const auto& path : selftrain::write_outputs(result, cfg, cfg.output_path)) std::cout << path.string() << '\n';
    return 0;
  } catch (const selftrain::ConfigError& e) {
    std::cerr << "config error [" << e.field() << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
