#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace piw {

enum class Errc {
  // telemetry
  NonMonotoneTime,
  MissingColumn,
  NonFiniteValue,
  EmptyLog,
  DegenerateSpan,
  // piwcore
  InsufficientSamples,
  DegenerateFit,
  NonPositiveAggressiveness,
  InvalidFit,
  // stats
  TooFewSamples,
  ZeroVariance,
  AllZeroDifferences,
  ZeroVarianceColumn,
  SingularDesign,
  DegenerateDesign,
  // wlmodel
  OneClassOnly,
  SeparationDetected,
  SingularInformation,
  DimensionMismatch,
  CorruptModelFile,
  // pilotsim
  UnstableLoop,
  AlphabetTooSmall,
  IndivisibleBlocks,
  // stream
  OutOfOrderRecord,
  MalformedRecord,
  BindFailure,
  // pipeline
  UnpairableRows,
  MalformedFile,
  InvalidArgument,
  Io,
};

std::string_view errc_name(Errc code);

/// Coarse classification used for CLI exit codes.
enum class ErrorClass { usage, data, numeric };
ErrorClass classify(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace piw
