#pragma once

#include <stdexcept>
#include <string>

namespace drank {

/// Broad failure classes; the command-line tool maps each to an exit code.
enum class ErrorKind {
  validation,   // bad input, violated precondition, degenerate design
  accuracy,     // a numerical method could not reach its stated accuracy
  convergence,  // an iterative procedure refused to produce a result
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::validation, what) {}
};

/// Argument outside the mathematical domain of a function (e.g. p not in (0,1)).
class DomainError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Sum of squared scores vanishes, so the least-squares slope is undefined.
class DegenerateDesignError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A score table lacks sigma2/beta entries needed for a variance formula.
class InsufficientTableError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Singular normal equations. `block()` names the offending block or column.
class RankDeficiencyError : public InvalidArgument {
 public:
  RankDeficiencyError(std::string block, const std::string& what)
      : InvalidArgument(what), block_(std::move(block)) {}
  const std::string& block() const noexcept { return block_; }

 private:
  std::string block_;
};

/// An estimate was combined with a sample or table it was not computed from.
class ProvenanceError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& what, double achieved_error)
      : Error(ErrorKind::accuracy, what), achieved_error_(achieved_error) {}
  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double achieved_error_;
};

/// f(Q_r) is zero or not finite; the series expansion cannot be evaluated.
class DegenerateDensityError : public Error {
 public:
  explicit DegenerateDensityError(const std::string& what)
      : Error(ErrorKind::accuracy, what) {}
};

class NonConvergenceError : public Error {
 public:
  explicit NonConvergenceError(const std::string& what)
      : Error(ErrorKind::convergence, what) {}
};

/// Process exit code for an error kind: 2 validation, 3 accuracy, 4 convergence.
int exit_code(ErrorKind kind) noexcept;

}  // namespace drank
