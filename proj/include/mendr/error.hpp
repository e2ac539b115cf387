#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mendr {

enum class ErrorKind {
  InvalidInput,
  ShapeError,
  NotPositiveDefinite,
  DegenerateStep,
  IncompleteDecomposition,
  InsufficientNegatives,
  SkippedRecording,
  CorruptDataset,
  StageOrderError,
  ConfigError,
  IOError,
  EmptyInput,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Process exit code used by the CLI for each error kind.
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace mendr
