#include "doctest.h"

#include "selftrain/errors.hpp"
#include "selftrain/experiments.hpp"

#include "json.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

using namespace selftrain;
namespace fs = std::filesystem;

namespace {

std::string field_of(const std::string& json) {
  try {
    parse_config(json);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::string validate_field(const ExperimentConfig& cfg) {
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

ExperimentConfig small(const std::string& name) {
  ExperimentConfig c;
  c.experiment = name;
  c.p = 100;
  c.u_bar_grid = {1.0, 4.0};
  c.trials = 6;
  c.tau = 2;
  c.master_seed = 11;
  return c;
}

const SweepRow* find_row(const std::vector<SweepRow>& rows, const std::string& method, const std::string& metric,
                         double u_bar, int tau) {
  for (const auto& r : rows)
    if (r.method == method && r.metric == metric && r.u_bar == u_bar && r.tau == tau) return &r;
  return nullptr;
}

fs::path temp_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("selftrain_test_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream b;
  b << in.rdbuf();
  return b.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SELFTRAIN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config defaults and round trip") {
  const ExperimentConfig d;
  CHECK(d.p == 400);
  CHECK(d.n_bar == 0.05);
  CHECK(d.sigma == 0.75);
  CHECK(d.gamma_threshold == 0.5);
  CHECK(d.trials == 100);
  CHECK(parse_config("{}") == d);

  ExperimentConfig c = small("landscape");
  c.n_bar = 0.1 + 0.2;
  c.sigma = 1.0 / 3.0;
  c.u_bar_grid = {0.1, 0.7, 1e3};
  c.master_seed = 18446744073709551615ULL;
  c.output_path = "some dir/x";
  CHECK(parse_config(emit_config(c)) == c);
  CHECK(parse_config(emit_config(d)) == d);
}

TEST_CASE("config errors name the field") {
  CHECK(field_of(R"({"bogus": 1})") == "bogus");
  CHECK(field_of(R"({"p": "400"})") == "p");
  CHECK(field_of(R"({"p": 2.5})") == "p");
  CHECK(field_of(R"({"u_bar_grid": [2, 1]})") == "u_bar_grid");
  CHECK(field_of(R"({"u_bar_grid": []})") == "u_bar_grid");
  CHECK(field_of(R"({"experiment": "nope"})") == "experiment");
  CHECK(field_of(R"({"sigma": -1})") == "sigma");
  CHECK(field_of(R"({"trials": 0})") == "trials");
  CHECK(field_of(R"({"master_seed": -3})") == "master_seed");
  CHECK(field_of("[1, 2]") == "config");
  CHECK(field_of("{not json") == "config");

  ExperimentConfig c;
  c.tau = 0;
  CHECK(validate_field(c) == "tau");
  c = ExperimentConfig{};
  c.output_path.clear();
  CHECK(validate_field(c) == "output_path");
  c = ExperimentConfig{};
  c.gamma_threshold = -0.1;
  CHECK(validate_field(c) == "gamma_threshold");
  c = ExperimentConfig{};
  c.experiment = "x";
  CHECK_THROWS_AS(run_experiment(c), ConfigError);
}

TEST_CASE("parallel_for covers every index and rethrows the lowest failure") {
  for (int threads : {1, 3, 8}) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(97, threads, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
    try {
      parallel_for(50, threads, [](std::size_t i) {
        if (i == 7 || i == 31 || i == 44) throw std::runtime_error(std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "7");
    }
  }
  parallel_for(0, 4, [](std::size_t) { FAIL("no calls expected"); });
}

TEST_CASE("bootstrap interval") {
  const auto flat = bootstrap_mean_ci(std::vector<double>(20, 0.3), 0.95, 500, {60, 0});
  CHECK(flat.low == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(flat.high == flat.low);
  std::vector<double> v;
  Rng rng({60, 1});
  for (int i = 0; i < 200; ++i) v.push_back(rng.normal() + 1.0);
  double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  const auto ci = bootstrap_mean_ci(v, 0.95, 2000, {60, 2});
  CHECK(ci.low < mean);
  CHECK(ci.high > mean);
  // The half width is close to 1.96 standard errors.
  CHECK(0.5 * (ci.high - ci.low) == doctest::Approx(1.96 / std::sqrt(200.0)).epsilon(0.2));

  // Swapping the two measured quantities negates the interval.
  std::vector<double> neg;
  for (double x : v) neg.push_back(-x);
  const auto nci = bootstrap_mean_ci(neg, 0.95, 2000, {60, 2});
  CHECK(nci.low == -ci.high);
  CHECK(nci.high == -ci.low);

  CHECK_THROWS_AS(bootstrap_mean_ci({}, 0.95, 100, {60, 0}), DomainError);
  CHECK_THROWS_AS(bootstrap_mean_ci(v, 1.0, 100, {60, 0}), DomainError);
  CHECK_THROWS_AS(bootstrap_mean_ci(v, 0.9, 1, {60, 0}), DomainError);
}

TEST_CASE("csv layout and deviation column") {
  CHECK(csv_header() ==
        "experiment,method,p,n_bar,u_bar,sigma,gamma_threshold,tau,trials,metric,empirical_mean,empirical_stderr,"
        "theory_value,deviation,ci_low,ci_high,flagged");
  for (const auto& name : {"gmm_sweep", "iterate_compare", "gap_fresh_vs_supervised"}) {
    const auto res = run_experiment(small(name));
    REQUIRE_FALSE(res.rows.empty());
    for (const auto& r : res.rows) {
      CHECK(r.experiment == name);
      CHECK(r.theory_value.has_value() == r.deviation.has_value());
      if (r.theory_value) CHECK(*r.deviation == r.empirical_mean - *r.theory_value);
      CHECK(r.empirical_stderr >= 0.0);
    }
    const std::string csv = to_csv(res.rows);
    CHECK(csv.rfind(csv_header() + "\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == res.rows.size() + 1);
  }
  SweepRow r;
  r.experiment = "e";
  r.method = "m";
  r.metric = "accuracy";
  r.empirical_mean = 0.5;
  const std::string line = to_csv({r}).substr(csv_header().size() + 1);
  CHECK(line == "e,m,0,0,0,0,0,0,0,accuracy,0.5,0,,,,,0\n");
}

TEST_CASE("gmm sweep trends at small scale") {
  ExperimentConfig c = small("gmm_sweep");
  c.p = 200;
  c.u_bar_grid = {1.0, 8.0};
  c.gamma_threshold = 0.0;
  c.tau = 2;
  c.trials = 40;
  const auto res = run_gmm_sweep(c, 2);
  const auto* lo = find_row(res.rows, "fresh_st", "accuracy", 1.0, 2);
  const auto* hi = find_row(res.rows, "fresh_st", "accuracy", 8.0, 2);
  REQUIRE(lo);
  REQUIRE(hi);
  CHECK(hi->empirical_mean > lo->empirical_mean);
  const auto* cot = find_row(res.rows, "fresh_st", "cotangent", 8.0, 2);
  REQUIRE(cot);
  REQUIRE(cot->theory_value);
  CHECK(std::abs(*cot->deviation) < 0.25 * *cot->theory_value);
  CHECK(find_row(res.rows, "supervised_init", "accuracy", 1.0, 0));
  CHECK_THROWS_AS(run_logistic_sweep(c), ConfigError);
}

TEST_CASE("iterate compare and logistic sweep emit their baselines") {
  const auto ic = run_iterate_compare(small("iterate_compare"));
  for (const auto& m : {"supervised_init", "supervised_u", "self_train_once", "fresh_st", "iterative_st"}) {
    bool seen = false;
    for (const auto& r : ic.rows) seen = seen || r.method == m;
    CHECK_MESSAGE(seen, m);
  }
  const auto* su = find_row(ic.rows, "supervised_u", "cotangent", 4.0, 0);
  REQUIRE(su);
  CHECK(*su->theory_value == doctest::Approx(std::sqrt(4.0) / 0.75));

  ExperimentConfig lc = small("logistic_sweep");
  lc.trials = 2;
  lc.u_bar_grid = {2.0};
  const auto ls = run_logistic_sweep(lc, 2);
  for (const auto& m : {"averaging_fresh", "logistic_fresh", "averaging_reuse", "logistic_reuse", "supervised_u"}) {
    bool seen = false;
    for (const auto& r : ls.rows) seen = seen || r.method == m;
    CHECK_MESSAGE(seen, m);
  }
  bool both_gammas = false;
  for (const auto& r : ls.rows) both_gammas = both_gammas || (r.method == "logistic_fresh" && r.gamma_threshold == 0.5);
  CHECK(both_gammas);
}

TEST_CASE("landscape and bounds suite outputs") {
  ExperimentConfig c = small("landscape");
  c.sigma = 1.0;
  c.trials = 1;
  const auto land = run_landscape(c);
  for (const auto& f : {"landscape_supervised.csv", "landscape_unsupervised_gamma_0.csv",
                        "landscape_semisup_regularized_rho_0.8.csv"})
    CHECK_MESSAGE(land.artifacts.count(f) == 1, f);
  for (const auto& [name, text] : land.artifacts) CHECK(text.rfind("alpha,value,std_error,flagged\n", 0) == 0);
  const auto* sup = find_row(land.rows, "supervised", "positive_minimizer", 0.0, 0);
  if (!sup)
    for (const auto& r : land.rows)
      if (r.method == "supervised") sup = &r;
  REQUIRE(sup);
  CHECK(std::abs(sup->empirical_mean - 0.5) < 0.02);

  ExperimentConfig b = small("bounds_suite");
  b.trials = 20;
  const auto bs = run_bounds_suite(b, 2);
  bool violation = false, pass = false;
  for (const auto& r : bs.rows) {
    if (r.metric == "violation_rate") {
      violation = true;
      CHECK(r.empirical_mean <= 0.1);
    }
    if (r.metric == "pass_rate") {
      pass = true;
      CHECK(r.empirical_mean == 1.0);
    }
  }
  CHECK(violation);
  CHECK(pass);
  REQUIRE(bs.artifacts.count("bounds_suite_report.json") == 1);
  const auto j = nlohmann::json::parse(bs.artifacts.at("bounds_suite_report.json"));
  CHECK(j.is_object());
}

TEST_CASE("gap rows") {
  ExperimentConfig c = small("gap_fresh_vs_supervised");
  c.trials = 30;
  c.tau = 1;
  c.u_bar_grid = {0.5, 1.0};
  const auto res = run_gap_fresh_vs_supervised(c, 2);
  int rows = 0;
  for (const auto& r : res.rows) {
    if (r.method != "fresh_st_minus_supervised") continue;
    ++rows;
    REQUIRE(r.ci_low);
    REQUIRE(r.ci_high);
    CHECK(*r.ci_low <= r.empirical_mean);
    CHECK(r.empirical_mean <= *r.ci_high);
    // One self-training step does not reach supervised learning on u labels.
    CHECK(r.empirical_mean < 0.0);
    CHECK(*r.theory_value < 0.0);
  }
  CHECK(rows == 2);
}

TEST_CASE("outputs are byte-identical across worker counts") {
  for (const auto& name : {"gmm_sweep", "gap_fresh_vs_supervised", "bounds_suite", "iterate_compare"}) {
    ExperimentConfig c = small(name);
    c.trials = 5;
    const std::string one = to_csv(run_experiment(c, 1).rows);
    CHECK_MESSAGE(to_csv(run_experiment(c, 8).rows) == one, name);
    CHECK(to_csv(run_experiment(c, 3).rows) == one);
    c.master_seed += 1;
    CHECK(to_csv(run_experiment(c, 1).rows) != one);
  }
}

TEST_CASE("write_outputs writes the table, the sidecar and artifacts") {
  const fs::path dir = temp_dir("write");
  ExperimentConfig c = small("bounds_suite");
  c.trials = 3;
  const auto res = run_experiment(c);
  const auto paths = write_outputs(res, c, dir);
  CHECK(paths.size() == 2 + res.artifacts.size());
  CHECK(slurp(dir / "bounds_suite.csv") == to_csv(res.rows));
  const auto side = nlohmann::json::parse(slurp(dir / "bounds_suite.json"));
  CHECK(side.at("version").get<std::string>() == library_version);
  CHECK(parse_config(side.at("config").dump()) == c);
  fs::remove_all(dir);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = temp_dir("cli");
  CHECK(run_cli("gmm_sweep --trials 2 --seed 3 --threads 2 --out " + (dir / "a").string() + " --config " +
                (dir / "missing.json").string()) != 0);
  {
    std::ofstream(dir / "ok.json") << R"({"p": 60, "u_bar_grid": [1, 2], "tau": 2})";
    std::ofstream(dir / "bad.json") << R"({"p": 60, "colour": "red"})";
    std::ofstream(dir / "neg.json") << R"({"sigma": -2})";
  }
  CHECK(run_cli("gmm_sweep --trials 2 --seed 3 --threads 2 --out " + (dir / "a").string() + " --config " +
                (dir / "ok.json").string()) == 0);
  CHECK(fs::exists(dir / "a" / "gmm_sweep.csv"));
  CHECK(run_cli("gmm_sweep --config " + (dir / "bad.json").string()) == 2);
  CHECK(run_cli("landscape --config " + (dir / "neg.json").string()) == 2);
  CHECK(run_cli("gmm_sweep --trials 0") == 2);
  CHECK(run_cli("show-config --config " + (dir / "ok.json").string()) == 0);
  // Output under a regular file cannot be created.
  { std::ofstream(dir / "blocker") << "x"; }
  CHECK(run_cli("gmm_sweep --trials 1 --config " + (dir / "ok.json").string() + " --out " +
                (dir / "blocker" / "sub").string()) == 3);

  // The same run through the CLI at 1 and 8 threads writes the same bytes.
  CHECK(run_cli("gap_fresh_vs_supervised --trials 4 --threads 1 --config " + (dir / "ok.json").string() + " --out " +
                (dir / "t1").string()) == 0);
  CHECK(run_cli("gap_fresh_vs_supervised --trials 4 --threads 8 --config " + (dir / "ok.json").string() + " --out " +
                (dir / "t8").string()) == 0);
  CHECK(slurp(dir / "t1" / "gap_fresh_vs_supervised.csv") == slurp(dir / "t8" / "gap_fresh_vs_supervised.csv"));
  fs::remove_all(dir);
}
