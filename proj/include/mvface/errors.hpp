#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace mvface {

/// Base of every error raised by the library. The CLI maps each subclass to
/// its own process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value; the message names the offending field.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Shapes that do not conform (view counts, row/column mismatches).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite input, failed convergence, singular systems.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what,
                        std::optional<double> last_estimate = std::nullopt)
      : Error(what), last_estimate_(last_estimate) {}

  std::optional<double> last_estimate() const { return last_estimate_; }

 private:
  std::optional<double> last_estimate_;
};

/// A solver input that makes the step size undefined (zero dictionary,
/// zero codes).
class DegenerateInputError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Unreadable files and malformed or truncated file contents.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Dataset protocol violations (missing subject/expression pairs, ...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvface
