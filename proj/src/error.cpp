#include "mendr/error.hpp"

namespace mendr {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DegenerateStep: return "DegenerateStep";
    case ErrorKind::IncompleteDecomposition: return "IncompleteDecomposition";
    case ErrorKind::InsufficientNegatives: return "InsufficientNegatives";
    case ErrorKind::SkippedRecording: return "SkippedRecording";
    case ErrorKind::CorruptDataset: return "CorruptDataset";
    case ErrorKind::StageOrderError: return "StageOrderError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IOError: return "IOError";
    case ErrorKind::EmptyInput: return "EmptyInput";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind) noexcept {
  return 10 + static_cast<int>(kind);
}

}  // namespace mendr
