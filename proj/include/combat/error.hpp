#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace combat {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidArity,
  kEmptyLabel,
  kUnknownAction,
  kMissingDuration,
  kBadDuration,
  kInvalidMode,
  kDuplicateCategory,
  kDanglingPress,
  kOrphanRelease,
  kNoFrames,
  kParseError,
  kOrderingViolation,
  kInvalidStage,
  kDegenerateEmbedding,
  kNumericFailure,
  kActionParseError,
  kObservationSchemaError,
  kReplayExhausted,
  kEmptyDataset,
  kInsufficientHistory,
  kValidationError,
  kGenerationShortfall,
  kIoError,
};

std::string_view error_kind_name(ErrorKind kind);

// All library failures surface as this exception; `kind()` is the stable,
// machine-readable discriminator the CLI reports.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace combat
