#include "selftrain/distributions.hpp"

#include "selftrain/errors.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>

namespace selftrain {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_count(Eigen::Index count, const char* what) {
  if (count < 1) throw DomainError(std::string(what) + ": sample count must be >= 1");
}

// Fills rows of `inputs` with y*X*mu + sigma*g, drawing per sample: y, X, then g.
void fill_samples(const MixtureSpec& spec, Matrix& inputs, std::vector<int>* labels, Rng& rng) {
  const Eigen::Index p = spec.p();
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const int y = rng.rademacher();
    const double x = sample_law(spec.x_law, rng);
    auto row = inputs.row(i);
    rng.fill_normal(row.data(), p);
    row *= spec.sigma;
    row += (y * x) * spec.mu.transpose();
    if (labels) (*labels)[static_cast<std::size_t>(i)] = y;
  }
}

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  v = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error("sample cache: truncated stream");
  return to_little_endian(v);
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

void write_columns(std::ostream& out, const Matrix& inputs, const std::vector<int>* labels) {
  put_u64(out, static_cast<std::uint64_t>(inputs.cols()));
  put_u64(out, static_cast<std::uint64_t>(inputs.rows()));
  put_u64(out, labels ? 1 : 0);
  for (Eigen::Index j = 0; j < inputs.cols(); ++j)
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) put_f64(out, inputs(i, j));
  if (labels)
    for (int y : *labels) put_f64(out, static_cast<double>(y));
}

struct RawCache {
  Matrix inputs;
  std::vector<int> labels;
  bool has_labels = false;
};

RawCache read_columns(std::istream& in) {
  const auto p = get_u64(in);
  const auto count = get_u64(in);
  const auto flag = get_u64(in);
  if (flag > 1) throw Error("sample cache: bad label flag");
  RawCache raw;
  raw.inputs.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < raw.inputs.cols(); ++j)
    for (Eigen::Index i = 0; i < raw.inputs.rows(); ++i) raw.inputs(i, j) = get_f64(in);
  raw.has_labels = flag == 1;
  if (raw.has_labels) {
    raw.labels.resize(count);
    for (auto& y : raw.labels) {
      const double v = get_f64(in);
      if (v != 1.0 && v != -1.0) throw Error("sample cache: label not in {-1,+1}");
      y = static_cast<int>(v);
    }
  }
  return raw;
}

}  // namespace

BoundedMargin BoundedMargin::with_ratio(double M) {
  if (!(M >= 1.0)) throw DomainError("BoundedMargin: M must be >= 1");
  // E[(1 + (M-1)U)^2] = (M^2 + M + 1)/3
  return BoundedMargin{std::sqrt(3.0 / (M * M + M + 1.0)), M};
}

std::string law_name(const XLaw& law) {
  return std::visit(overloaded{[](const ConstantOne&) { return std::string("constant_one"); },
                               [](const FoldedNormal&) { return std::string("folded_normal"); },
                               [](const BoundedMargin&) { return std::string("bounded_margin"); }},
                    law);
}

double law_mean(const XLaw& law) {
  return std::visit(overloaded{[](const ConstantOne&) { return 1.0; },
                               [](const FoldedNormal&) { return std::sqrt(2.0 / std::numbers::pi); },
                               [](const BoundedMargin& b) { return 0.5 * b.gamma * (1.0 + b.M); }},
                    law);
}

double law_second_moment(const XLaw& law) {
  return std::visit(overloaded{[](const ConstantOne&) { return 1.0; }, [](const FoldedNormal&) { return 1.0; },
                               [](const BoundedMargin& b) {
                                 return b.gamma * b.gamma * (b.M * b.M + b.M + 1.0) / 3.0;
                               }},
                    law);
}

double law_tail(const XLaw& law, double t) {
  return std::visit(overloaded{[t](const ConstantOne&) { return t < 1.0 ? 1.0 : 0.0; },
                               [t](const FoldedNormal&) { return t <= 0.0 ? 1.0 : 2.0 * q_tail(t); },
                               [t](const BoundedMargin& b) {
                                 const double lo = b.gamma;
                                 const double hi = b.M * b.gamma;
                                 if (t < lo) return 1.0;
                                 if (t >= hi) return 0.0;
                                 return (hi - t) / (hi - lo);
                               }},
                    law);
}

double sample_law(const XLaw& law, Rng& rng) {
  return std::visit(overloaded{[](const ConstantOne&) { return 1.0; },
                               [&rng](const FoldedNormal&) { return std::abs(rng.normal()); },
                               [&rng](const BoundedMargin& b) {
                                 return b.gamma + (b.M * b.gamma - b.gamma) * rng.uniform();
                               }},
                    law);
}

void MixtureSpec::validate() const {
  if (mu.size() < 1) throw DomainError("MixtureSpec: dimension must be >= 1");
  if (std::abs(mu.norm() - 1.0) > 1e-12) throw DomainError("MixtureSpec: mu must have unit norm");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("MixtureSpec: sigma must be >= 0");
}

MixtureSpec MixtureSpec::binary_gmm(int p, double sigma) { return general(p, sigma, ConstantOne{}); }

MixtureSpec MixtureSpec::general(int p, double sigma, XLaw law) {
  if (p < 1) throw DomainError("MixtureSpec: dimension must be >= 1");
  MixtureSpec spec{Vector::Unit(p, 0), sigma, law};
  spec.validate();
  return spec;
}

LabeledSet sample_labeled(const MixtureSpec& spec, Eigen::Index n, const SeedSpec& seed) {
  check_count(n, "sample_labeled");
  spec.validate();
  LabeledSet out{Matrix(n, spec.p()), std::vector<int>(static_cast<std::size_t>(n))};
  Rng rng(seed);
  fill_samples(spec, out.inputs, &out.labels, rng);
  return out;
}

UnlabeledSet sample_unlabeled(const MixtureSpec& spec, Eigen::Index u, const SeedSpec& seed) {
  check_count(u, "sample_unlabeled");
  spec.validate();
  UnlabeledSet out{Matrix(u, spec.p())};
  Rng rng(seed);
  fill_samples(spec, out.inputs, nullptr, rng);
  return out;
}

SecondMoment population_second_moment(const MixtureSpec& spec) {
  const double s2 = spec.sigma * spec.sigma;
  return {s2 + law_second_moment(spec.x_law), s2};
}

void write_cache(std::ostream& out, const LabeledSet& data) { write_columns(out, data.inputs, &data.labels); }

void write_cache(std::ostream& out, const UnlabeledSet& data) { write_columns(out, data.inputs, nullptr); }

LabeledSet read_labeled_cache(std::istream& in) {
  auto raw = read_columns(in);
  if (!raw.has_labels) throw Error("sample cache: labels expected but absent");
  return {std::move(raw.inputs), std::move(raw.labels)};
}

UnlabeledSet read_unlabeled_cache(std::istream& in) {
  auto raw = read_columns(in);
  return {std::move(raw.inputs)};
}

}  // namespace selftrain
