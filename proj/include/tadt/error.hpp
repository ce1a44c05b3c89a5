#pragma once

#include <stdexcept>
#include <string>

namespace tadt {

enum class ErrorKind {
  Parameter,
  Shape,
  EmptyTrajectory,
  Parse,
  Schema,
  Unsupported,
  Evaluation,
  Context,
  Label,
  NonFinite,
  Sampling,
  Checkpoint,
  Enumeration,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Validation-type errors map to CLI exit code 1, everything else to 2.
  bool is_validation() const noexcept {
    return kind_ == ErrorKind::Parameter || kind_ == ErrorKind::Parse ||
           kind_ == ErrorKind::Schema || kind_ == ErrorKind::Label;
  }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::EmptyTrajectory: return "empty-trajectory";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Evaluation: return "evaluation";
    case ErrorKind::Context: return "context";
    case ErrorKind::Label: return "label";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::Sampling: return "sampling";
    case ErrorKind::Checkpoint: return "checkpoint";
    case ErrorKind::Enumeration: return "enumeration";
  }
  return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace tadt
