#pragma once

#include <stdexcept>
#include <string>

namespace glpp {

/// Error conditions surfaced by the library. Each maps onto one failure
/// mode named in the module contracts; the CLI turns them into one-line
/// diagnostics.
enum class ErrorCode {
  ZeroVarianceRow,
  NonPositiveTemperature,
  LabelOutOfRange,
  DegenerateSupport,
  AllAnchors,
  InsufficientSamples,
  ShapeMismatch,
  KTooLarge,
  LengthMismatch,
  NoRelevantItems,
  ZeroVector,
  NotInvolution,
  EmptyList,
  UnknownKey,
  InvalidValue,
  MissingRequired,
  BadMagic,
  TruncatedPayload,
  MalformedCsvRow,
  IoFailure,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace glpp
