#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace e2r {

enum class ErrorCode {
  MalformedRecord,
  EmptyStream,
  InsufficientPoints,
  DegenerateGeometry,
  NoKeypoints,
  InsufficientMatches,
  NoConsensus,
  TooFewSamples,
  ZeroDuration,
  NoInBoundsPoints,
  ParamMismatch,
  DegenerateHeatmap,
  EmptyLibrary,
  IllegalTransition,
  ProviderTimeout,
  ProviderRejected,
  MissingAttachment,
  EmptyDocument,
  CorpusTooSmall,
  MissingLexiconEntry,
  ConfigInvalid,
  PortUnavailable,
  NotFound,
  NotReplayable,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code);

// Process exit status for the command-line tool.
int exit_code(ErrorCode code);

// Single exception type for the whole library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace e2r
