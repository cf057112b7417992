#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gmsl {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unusable data or models: out-of-domain covariates, degenerate matrices,
// failed estimations. Mapped to process exit code 1.
struct DomainError : Error {
  using Error::Error;
};

// Bad configuration, missing columns, unreadable or unwritable files.
// Mapped to process exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// Structurally broken input text (unbalanced quotes, malformed grid spec).
struct ParseError : ConfigError {
  ParseError(std::size_t line_, const std::string& what_)
      : ConfigError("line " + std::to_string(line_) + ": " + what_), line(line_) {}
  std::size_t line;
};

// A column cannot be normalized (constant column under MinMax or MaxAbs,
// zero variance under ZScore).
struct DegenerateColumnError : DomainError {
  explicit DegenerateColumnError(const std::string& term_)
      : DomainError("degenerate design column for term " + term_), term(term_) {}
  std::string term;
};

// Normal equations singular at lambda = 0; retry with lambda > 0.
struct RankDeficiencyError : DomainError {
  using DomainError::DomainError;
};

// Thresholding removed every term.
struct EmptyModelError : DomainError {
  explicit EmptyModelError(double delta_)
      : DomainError("threshold " + std::to_string(delta_) + " removed every term"),
        delta(delta_) {}
  double delta;
};

// Threshold sweep exposes no defensible knee; the caller must pick delta.
struct NoKneeError : DomainError {
  using DomainError::DomainError;
};

// Estimation cannot proceed (empty magnitude bin, too few events).
struct EstimationError : DomainError {
  using DomainError::DomainError;
};

// Residuals keyed by an event the decomposition does not know, or duplicate
// event groups.
struct KeyingError : DomainError {
  using DomainError::DomainError;
};

// Exit code policy: 0 success, 1 domain or estimation failure, 2 config or IO.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  return 1;
}

} // namespace gmsl
