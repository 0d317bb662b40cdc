#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace acpo {

enum class ErrorCode {
  InvalidArgument,
  EndpointUnreachable,
  EmptyCompletion,
  FixtureMiss,
  IoReadFailed,
  IoWriteFailed,
  ParseError,
  NoSentences,
  DimMismatch,
  EmptyInput,
  UnclusteredFact,
  InsufficientResponses,
  LengthMismatch,
  NonpositiveBeta,
  MissingLogprobs,
  UnknownFact,
  InconsistentRun,
  ConfigInvalid,
  ConfigHashMismatch,
  StageFailed,
  LockContention,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; `code()` is the
// machine-readable part, `what()` carries the human context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace acpo
