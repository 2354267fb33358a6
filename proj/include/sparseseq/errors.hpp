// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sparseseq {

// Error taxonomy shared by every module. All derive from std::runtime_error so
// callers that only care about "something failed" can catch one type.

/// Incompatible tensor shapes passed to a primitive.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (non-scalar loss, negative delta, ...).
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN or infinity where a finite number was required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameter or configuration value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `line` is 1-based, 0 when not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Dataset content violates an invariant (non-monotone times, bad labels).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Masked loss has no observed target to normalize by.
class NoObservedTargets : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Metric cannot be computed for the given labels (e.g. single class).
class MetricUndefined : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Synthetic class quota not reached within the draw budget.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sparseseq
