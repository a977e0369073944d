#pragma once

#include <stdexcept>
#include <string>

namespace cascade {

// Maps onto process exit codes: usage -> 1, data -> 2, internal -> 3.
enum class ErrorKind { usage = 1, data = 2, internal = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

// Raised by exposure queries on (user, tag) pairs that were never adopted.
class NoAdoptionError : public DataError {
 public:
  using DataError::DataError;
};

// Raised when a user has no first usage with a non-empty neighborhood.
class UndefinedThresholdError : public DataError {
 public:
  using DataError::DataError;
};

// Statistical routines on inputs they cannot summarize (degenerate samples,
// constant coordinates, too few points).
class StatsError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace cascade
