#pragma once

#include <stdexcept>
#include <string>

namespace rumorts {

// Numeric values double as CLI exit codes and C API status codes.
enum class ErrorKind : int {
  Usage = 1,
  Data = 2,
  Training = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Invalid configuration or argument supplied by the caller.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error(ErrorKind::Usage, message) {}
};

/// Malformed or degenerate input data.
class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error(ErrorKind::Data, message) {}
};

/// Matrix or sequence dimensions that do not line up.
class ShapeError : public DataError {
 public:
  explicit ShapeError(const std::string& message) : DataError(message) {}
};

/// Optimisation diverged or produced non-finite values.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& message) : Error(ErrorKind::Training, message) {}
};

}  // namespace rumorts
