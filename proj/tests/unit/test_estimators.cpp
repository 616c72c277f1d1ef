#include "doctest.h"
#include "oracles.hpp"

#include "selftrain/errors.hpp"
#include "selftrain/estimators.hpp"
#include "selftrain/theory.hpp"

#include <cmath>

using namespace selftrain;

namespace {

// Unit vector with correlation alpha to e_1, orthogonal part along e_2.
LinearModel aligned_model(int p, double alpha) {
  Vector b = Vector::Zero(p);
  b[0] = alpha;
  b[1] = std::sqrt(1.0 - alpha * alpha);
  return LinearModel(b);
}

bool same(const Vector& a, const Vector& b) { return a.size() == b.size() && (a.array() == b.array()).all(); }

}  // namespace

TEST_CASE("LinearModel rejects zero and non-finite vectors") {
  CHECK_THROWS_AS(LinearModel(Vector::Zero(3)), DegenerateModelError);
  Vector v = Vector::Ones(3);
  v[1] = std::nan("");
  CHECK_THROWS(LinearModel(v));
  CHECK(LinearModel(Vector::Ones(2)).predict(Vector::Zero(2)) == 1);
}

TEST_CASE("averaging_fit examples") {
  LabeledSet one;
  one.inputs = Matrix(1, 3);
  one.inputs << 1.0, -2.0, 3.0;
  one.labels = {-1};
  CHECK(same(averaging_fit(one).beta(), Vector(-one.inputs.row(0).transpose())));

  LabeledSet two;
  two.inputs = Matrix(2, 2);
  two.inputs << 1.0, 2.0, 1.0, 2.0;
  two.labels = {1, -1};
  CHECK_THROWS_AS(averaging_fit(two), DegenerateModelError);

  const auto spec = MixtureSpec::binary_gmm(400, 0.75);
  const auto m = averaging_fit(sample_labeled(spec, 10000, {1, 0}));
  CHECK(correlation(m.beta(), spec.mu) > 0.95);
}

TEST_CASE("pseudo_label_select examples") {
  const auto spec = MixtureSpec::binary_gmm(10, 1.0);
  const auto data = sample_unlabeled(spec, 4000, {2, 0});
  const LinearModel truth(spec.mu);

  auto all = pseudo_label_select(truth, data, 0.0);
  CHECK(all.accepted_count == 4000);
  CHECK(all.rejected_count == 0);

  auto none = pseudo_label_select(truth, data, 1e6);
  CHECK(none.accepted_count == 0);
  CHECK(none.rejected_count == 4000);

  auto half = pseudo_label_select(truth, data, 1.0);
  const double frac = half.accepted_count / 4000.0;
  // P(|y + g| >= 1) = 1/2 + Q(2).
  const double expected = 0.5 + oracle::q_tail(2.0);
  CHECK(std::abs(frac - expected) < 3.0 * std::sqrt(expected * (1 - expected) / 4000.0));
  CHECK(half.accepted_count + half.rejected_count == 4000);
}

TEST_CASE("pseudo-labeled set invariants") {
  const auto spec = MixtureSpec::binary_gmm(8, 0.9);
  const auto data = sample_unlabeled(spec, 500, {3, 0});
  const LinearModel m(gaussian_vector(8, {3, 1}));
  const auto s = pseudo_label_select(m, data, 0.7);
  CHECK(static_cast<std::size_t>(s.inputs.rows()) == s.accepted_count);
  for (Eigen::Index i = 0; i < s.inputs.rows(); ++i) {
    const double proj = m.beta().dot(s.inputs.row(i).transpose());
    CHECK(std::abs(proj) / m.beta().norm() >= 0.7);
    CHECK(s.pseudo_labels[i] == (proj >= 0 ? 1 : -1));
  }
}

TEST_CASE("self_train_step two-sample expansion") {
  UnlabeledSet d;
  d.inputs = Matrix(2, 2);
  d.inputs << 2.0, 1.0, -1.0, 3.0;
  const LinearModel m(Vector::Unit(2, 0));
  const Vector out = self_train_step(m, d, 0.0).beta();
  CHECK(out[0] == doctest::Approx(1.5));
  CHECK(out[1] == doctest::Approx(-1.0));
}

TEST_CASE("self_train_step errors") {
  const auto spec = MixtureSpec::binary_gmm(4, 1.0);
  const auto d = sample_unlabeled(spec, 10, {4, 0});
  CHECK_THROWS_AS(self_train_step(LinearModel(spec.mu), d, 1e6), AllRejectedError);
  UnlabeledSet sym;
  sym.inputs = Matrix(2, 2);
  // Both inputs project to 0 on b, so both get label +1 and cancel.
  sym.inputs << 1.0, 1.0, -1.0, -1.0;
  Vector b(2);
  b << 1.0, -1.0;
  CHECK_THROWS_AS(self_train_step(LinearModel(b), sym, 0.0), DegenerateModelError);
}

TEST_CASE("self_train_step at Gamma = 0 equals averaging on pseudo-labels exactly") {
  const auto spec = MixtureSpec::binary_gmm(30, 0.75);
  const auto d = sample_unlabeled(spec, 300, {5, 0});
  const LinearModel m(gaussian_vector(30, {5, 1}));
  const auto pl = pseudo_label_select(m, d, 0.0);
  LabeledSet as_labeled{pl.inputs, pl.pseudo_labels};
  CHECK(same(self_train_step(m, d, 0.0).beta(), averaging_fit(as_labeled).beta()));
}

TEST_CASE("estimators are scale invariant and sign equivariant in the initial model") {
  const auto spec = MixtureSpec::general(12, 0.8, FoldedNormal{});
  const auto d = sample_unlabeled(spec, 2000, {6, 0});
  const LinearModel m(gaussian_vector(12, {6, 1}));
  const LinearModel m4(Vector(4.0 * m.beta()));
  const LinearModel neg(Vector(-m.beta()));
  for (double G : {0.0, 0.5}) {
    const Vector a = self_train_step(m, d, G).beta();
    CHECK(correlation(a, self_train_step(m4, d, G).beta()) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(same(self_train_step(neg, d, G).beta(), Vector(-a)));

    const Vector r = ridge_pseudo_fit(m, d, G, 0.5).beta();
    CHECK(correlation(r, ridge_pseudo_fit(m4, d, G, 0.5).beta()) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((ridge_pseudo_fit(neg, d, G, 0.5).beta() + r).norm() <= 1e-12 * r.norm());

    const Vector e = early_stop_fit(m, d, G).beta();
    CHECK(correlation(e, early_stop_fit(m4, d, G).beta()) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(same(early_stop_fit(neg, d, G).beta(), Vector(-e)));
  }
}

TEST_CASE("iterate_fresh and iterate_reuse base cases") {
  const auto spec = MixtureSpec::binary_gmm(40, 0.75);
  const LinearModel m0 = aligned_model(40, 0.5);
  const SeedSpec seed{7, 0};
  const auto t = iterate_fresh(m0, spec, 80, 0.3, 1, seed);
  CHECK(t.rounds.size() == 2);
  CHECK(same(t.model.beta(), self_train_step(m0, sample_unlabeled(spec, 80, seed.child(1)), 0.3).beta()));

  const auto d = sample_unlabeled(spec, 80, {7, 1});
  const auto r = iterate_reuse(m0, d, 0.3, 1, spec);
  CHECK(same(r.model.beta(), self_train_step(m0, d, 0.3).beta()));
  CHECK(r.rounds[0].correlation == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.rounds[1].round == 1);
}

TEST_CASE("iterate_fresh reports the failing round") {
  const auto spec = MixtureSpec::binary_gmm(5, 0.5);
  try {
    iterate_fresh(LinearModel(spec.mu), spec, 3, 100.0, 3, {8, 0});
    FAIL("expected AllRejectedError");
  } catch (const AllRejectedError& e) {
    CHECK(e.round() == 1);
  }
}

TEST_CASE("iterate_reuse reaches a fixed point") {
  const auto spec = MixtureSpec::binary_gmm(400, 0.75);
  int converged = 0;
  for (std::uint64_t t = 0; t < 10; ++t) {
    const LinearModel m0 = averaging_fit(sample_labeled(spec, 20, {9, 2 * t}));
    const auto r = iterate_reuse(m0, sample_unlabeled(spec, 800, {9, 2 * t + 1}), 0.0, 20, spec);
    converged += r.rounds.back().step_correlation > 1.0 - 1e-6;
  }
  CHECK(converged >= 8);
}

TEST_CASE("Fresh-ST accuracy increases with rounds above the fixed point") {
  const auto spec = MixtureSpec::binary_gmm(400, 0.75);
  std::vector<double> acc(4, 0.0);
  const int trials = 40;
  for (int t = 0; t < trials; ++t) {
    const SeedSpec s{10, static_cast<std::uint64_t>(t)};
    const auto m0 = averaging_fit(sample_labeled(spec, 20, s.child(0)));
    const auto tr = iterate_fresh(m0, spec, 2000, 0.0, 3, s.child(1));
    for (int k = 0; k <= 3; ++k) acc[k] += tr.rounds[k].accuracy / trials;
  }
  CHECK(acc[1] < acc[2]);
  CHECK(acc[2] < acc[3]);
}

TEST_CASE("logistic_fit on two symmetric points") {
  PseudoLabeledSet d;
  d.inputs = Matrix(2, 3);
  d.inputs << 1.0, 2.0, -0.5, -1.0, -2.0, 0.5;
  d.pseudo_labels = {1, -1};
  d.accepted_count = 2;
  TrainConfig cfg;
  cfg.ridge_lambda = 0.1;
  cfg.max_steps = 5000;
  const auto r = logistic_fit(d, cfg);
  CHECK(correlation(r.model.beta(), d.inputs.row(0).transpose()) > 0.999);
  CHECK(r.converged);
  CHECK(r.loss <= std::log(2.0));
  CHECK_FALSE(r.divergence_risk);
}

TEST_CASE("logistic_fit diagnostics") {
  const auto spec = MixtureSpec::binary_gmm(20, 0.5);
  const auto d = sample_unlabeled(spec, 200, {11, 0});
  const auto pl = pseudo_label_select(LinearModel(spec.mu), d, 0.0);
  TrainConfig cfg;
  cfg.ridge_lambda = 0.0;
  cfg.max_steps = 50;
  const auto r = logistic_fit(pl, cfg);
  CHECK_FALSE(r.converged);
  CHECK(r.steps == 50);
  CHECK(r.loss <= std::log(2.0));
  CHECK(r.loss == doctest::Approx(logistic_objective(pl, r.model.beta(), 0.0)));

  // Pseudo-labels from the generating model are separable; once the iterate
  // separates them too, an unregularized fit is flagged.
  cfg.max_steps = 5000;
  CHECK(logistic_fit(pl, cfg).divergence_risk);

  TrainConfig dflt;
  const auto r2 = logistic_fit(pl, dflt);
  CHECK(r2.lambda == doctest::Approx(1e-3 / 200.0));

  PseudoLabeledSet empty;
  empty.inputs = Matrix(0, 20);
  CHECK_THROWS_AS(logistic_fit(empty, dflt), AllRejectedError);
}

TEST_CASE("logistic training loss never exceeds log 2") {
  const auto spec = MixtureSpec::binary_gmm(50, 1.0);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto d = sample_unlabeled(spec, 100, {12, s});
    const auto pl = pseudo_label_select(LinearModel(gaussian_vector(50, {13, s})), d, 0.2);
    TrainConfig cfg;
    cfg.max_steps = 200;
    const auto r = logistic_fit(pl, cfg);
    CHECK(r.loss <= std::log(2.0));
  }
}

TEST_CASE("averaging self-training is at least as accurate as logistic self-training") {
  // p = 400, n_bar = 0.2, sigma = 0.75, one round with u = p, Gamma = 0.
  const auto spec = MixtureSpec::binary_gmm(400, 0.75);
  double avg = 0.0, logi = 0.0;
  const int trials = 100;
  TrainConfig cfg;
  cfg.max_steps = 300;
  cfg.tolerance = 1e-4;
  for (int t = 0; t < trials; ++t) {
    const SeedSpec s{14, static_cast<std::uint64_t>(t)};
    const auto m0 = averaging_fit(sample_labeled(spec, 80, s.child(0)));
    const auto d = sample_unlabeled(spec, 400, s.child(1));
    avg += alignment_stats(self_train_step(m0, d, 0.0), spec).accuracy;
    logi += alignment_stats(logistic_fit(pseudo_label_select(m0, d, 0.0), cfg).model, spec).accuracy;
  }
  CHECK(avg >= logi);
}

TEST_CASE("TrainConfig validation") {
  TrainConfig c;
  c.validate();
  c.tolerance = 0.0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.max_steps = 0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.step_size = -1.0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.ridge_lambda = -1.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("ridge limits and singularity") {
  const auto spec = MixtureSpec::binary_gmm(30, 0.8);
  const auto d = sample_unlabeled(spec, 3000, {15, 0});
  const LinearModel m = aligned_model(30, 0.6);
  for (double G : {0.0, 0.4})
    CHECK(correlation(ridge_pseudo_fit(m, d, G, 1e6).beta(), self_train_step(m, d, G).beta()) > 0.999);
  const auto small = sample_unlabeled(spec, 10, {15, 1});
  CHECK_THROWS_AS(ridge_pseudo_fit(m, small, 0.0, 0.0), IllPosedError);
  CHECK_NOTHROW(ridge_pseudo_fit(m, small, 0.0, 0.1));
  CHECK_THROWS_AS(ridge_pseudo_fit(m, d, 1e6, 1.0), AllRejectedError);
}

TEST_CASE("ridge solution solves the normal equations") {
  const auto spec = MixtureSpec::binary_gmm(6, 0.9);
  const auto d = sample_unlabeled(spec, 200, {16, 0});
  const LinearModel m(gaussian_vector(6, {16, 1}));
  const double lam = 0.3, G = 0.2;
  const Vector b = ridge_pseudo_fit(m, d, G, lam).beta();
  // Brute-force gradient of (1/u) sum 1(acc)(y - b^T x)^2 / 2 + lam |b|^2 / 2 ... in the
  // normalization (1/u) sum 1(acc) x x^T b + lam b = (1/u) sum 1(acc) y x.
  Vector lhs = lam * b, rhs = Vector::Zero(6);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const Vector x = d.inputs.row(i).transpose();
    const double proj = m.beta().dot(x) / m.beta().norm();
    if (std::abs(proj) < G) continue;
    const double y = proj >= 0 ? 1.0 : -1.0;
    lhs += x * x.dot(b) / 200.0;
    rhs += y * x / 200.0;
  }
  CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("ridge without regularization keeps the initial direction (folded normal)") {
  const auto spec = MixtureSpec::general(20, 1.0, FoldedNormal{});
  const auto d = sample_unlabeled(spec, 100000, {17, 0});
  const LinearModel m = aligned_model(20, 0.6);
  CHECK(correlation(ridge_pseudo_fit(m, d, 0.0, 0.0).beta(), m.beta()) > 0.99);
}

TEST_CASE("ridge cot ratio matches kappa(1) and early stopping matches 1 + sigma^-2") {
  const LinearModel m = aligned_model(20, 0.6);
  {
    const auto spec = MixtureSpec::general(20, 1.0, FoldedNormal{});
    const auto d = sample_unlabeled(spec, 100000, {18, 0});
    const double base = cotangent(m.beta(), spec.mu);
    const double ratio = cotangent(ridge_pseudo_fit(m, d, 0.0, 1.0).beta(), spec.mu) / base;
    CHECK(std::abs(ratio / (4.0 / 3.0) - 1.0) < 0.05);
    const double es = cotangent(early_stop_fit(m, d, 0.0).beta(), spec.mu) / base;
    CHECK(std::abs(es / 2.0 - 1.0) < 0.05);
  }
  {
    const auto spec = MixtureSpec::general(20, 0.5, FoldedNormal{});
    const auto d = sample_unlabeled(spec, 100000, {18, 1});
    const double es = cotangent(early_stop_fit(m, d, 0.0).beta(), spec.mu) / cotangent(m.beta(), spec.mu);
    CHECK(std::abs(es / 5.0 - 1.0) < 0.07);
  }
}

TEST_CASE("early_stop_fit differs from self_train_step by the acceptance share") {
  const auto spec = MixtureSpec::binary_gmm(9, 0.7);
  const auto d = sample_unlabeled(spec, 500, {19, 0});
  const LinearModel m(gaussian_vector(9, {19, 1}));
  CHECK(correlation(early_stop_fit(m, d, 0.0).beta(), self_train_step(m, d, 0.0).beta()) ==
        doctest::Approx(1.0).epsilon(1e-14));
  const auto pl = pseudo_label_select(m, d, 0.5);
  const double share = static_cast<double>(pl.accepted_count) / 500.0;
  CHECK((early_stop_fit(m, d, 0.5).beta() - share * self_train_step(m, d, 0.5).beta()).norm() < 1e-13);
}

TEST_CASE("accuracy_from_alignment") {
  CHECK(accuracy_from_alignment(0.0, 0.9) == 0.5);
  CHECK(accuracy_from_alignment(1.0, 0.75) == doctest::Approx(0.908789).epsilon(1e-6));
  CHECK(accuracy_from_alignment(1.0, 0.75) == doctest::Approx(1.0 - oracle::q_tail(4.0 / 3.0)).epsilon(1e-13));
  double prev = 0.0;
  for (double a = -1.0; a <= 1.0; a += 0.01) {
    const double v = accuracy_from_alignment(a, 0.6);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("accuracy_from_alignment matches empirical test accuracy") {
  const auto spec = MixtureSpec::binary_gmm(30, 0.75);
  const LinearModel m = aligned_model(30, 0.4);
  const auto test = sample_labeled(spec, 100000, {20, 0});
  std::vector<double> hits;
  for (Eigen::Index i = 0; i < test.size(); ++i)
    hits.push_back(m.predict(test.inputs.row(i).transpose()) == test.labels[i] ? 1.0 : 0.0);
  const auto ms = oracle::mean_se(hits);
  CHECK(std::abs(ms.mean - accuracy_from_alignment(0.4, 0.75)) < 3.0 * ms.se);
}

TEST_CASE("population_accuracy for general laws agrees with quadrature") {
  const double a = 0.5, s = 0.7;
  CHECK(population_accuracy(a, s, ConstantOne{}) == doctest::Approx(accuracy_from_alignment(a, s)).epsilon(1e-15));
  const double fn = oracle::simpson(
      [&](double t) { return std::sqrt(2.0 / std::numbers::pi) * std::exp(-0.5 * t * t) * oracle::cdf(a * t / s); }, 0,
      12);
  CHECK(population_accuracy(a, s, FoldedNormal{}) == doctest::Approx(fn).epsilon(1e-10));
  const auto b = BoundedMargin::with_ratio(2.0);
  const double bm =
      oracle::simpson([&](double t) { return oracle::cdf(a * t / s) / (b.M * b.gamma - b.gamma); }, b.gamma,
                      b.M * b.gamma);
  CHECK(population_accuracy(a, s, b) == doctest::Approx(bm).epsilon(1e-9));
}
