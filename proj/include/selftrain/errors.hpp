#pragma once

#include <stdexcept>
#include <string>

namespace selftrain {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model vector is zero (or otherwise carries no direction).
class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

/// The acceptance threshold rejected every unlabeled sample.
class AllRejectedError : public Error {
 public:
  explicit AllRejectedError(const std::string& what, int round = -1)
      : Error(round < 0 ? what : what + " (round " + std::to_string(round) + ")"), round_(round) {}

  int round() const noexcept { return round_; }

 private:
  int round_;
};

/// A linear system that has no unique solution.
class IllPosedError : public Error {
 public:
  using Error::Error;
};

/// Theorem-bound resolution outside its admissible range.
class InvalidResolutionError : public Error {
 public:
  using Error::Error;
};

/// Arguments outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Constrained problem with an empty feasible set.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration failed validation; `field()` names the offender.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace selftrain
