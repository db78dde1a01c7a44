#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace scopf {

/// Malformed case-file text. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  [[nodiscard]] int line() const { return line_; }

 private:
  int line_;
};

/// Well-formed input that violates a model invariant (dangling reference,
/// duplicate slack, disconnected network, ...).
class SemanticError : public std::runtime_error {
 public:
  explicit SemanticError(const std::vector<std::string>& diagnostics);
  [[nodiscard]] const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A Newton matrix could not be factorized.
class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver ran out of iterations. Carries the residual history.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  [[nodiscard]] const std::vector<double>& residual_history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// No dispatch satisfies the device limits.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double max_violation)
      : std::runtime_error(what), max_violation_(max_violation) {}
  [[nodiscard]] double max_violation() const { return max_violation_; }

 private:
  double max_violation_;
};

/// Caller broke a documented precondition (stale factorization, bad config).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace scopf
