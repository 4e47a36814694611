#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wdiff {

enum class ErrorCode {
  UnsupportedWavelet,
  TooManyLevels,
  ShapeMismatch,
  InvalidSchedule,
  GraphStateError,
  NonFiniteLoss,
  EmptySequence,
  EmptyReference,
  BinMismatch,
  DegenerateFeature,
  ParseError,
  NonNumericCell,
  EmptyData,
  WindowTooLong,
  InvalidConfig,
  CheckpointError,
  IoError,
};

std::string_view code_name(ErrorCode code);

// Every failure the library reports carries a stable code; the CLI prints
// `error: <CODE>: <message>` and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wdiff
