#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dplopt {

/// Base class for every error raised by the library. The CLI maps all of
/// these to exit code 1 (bad input or domain violation).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the function (p <= 0, D <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Strict-bias evaluation asked for a direction with no stored bias.
class MissingBiasError : public Error {
 public:
  using Error::Error;
};

/// Too few observations or distinct ratios to determine the requested fit.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// The data cannot determine the parameters (e.g. fewer distinct data
/// sizes than unknowns in the data-scaling fit).
class IdentifiabilityError : public Error {
 public:
  using Error::Error;
};

/// Vector or table dimensions do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Constraint set is empty (e.g. floor * n >= 1).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A resource bound (grid size, dimension) would be exceeded.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// Malformed input document. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Iteration produced non-finite values. Carries the best point seen.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> best)
      : Error(what), best_(std::move(best)) {}
  const std::vector<double>& best_so_far() const noexcept { return best_; }

 private:
  std::vector<double> best_;
};

/// A fitting step failed; `step()` is 1, 2, 3 (the staged estimation) or
/// 4 (joint refinement).
class FitStepError : public Error {
 public:
  FitStepError(int step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace dplopt
