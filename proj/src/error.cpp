#include "piw/error.hpp"

namespace piw {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::NonMonotoneTime: return "NonMonotoneTime";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::EmptyLog: return "EmptyLog";
    case Errc::DegenerateSpan: return "DegenerateSpan";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::DegenerateFit: return "DegenerateFit";
    case Errc::NonPositiveAggressiveness: return "NonPositiveAggressiveness";
    case Errc::InvalidFit: return "InvalidFit";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::AllZeroDifferences: return "AllZeroDifferences";
    case Errc::ZeroVarianceColumn: return "ZeroVarianceColumn";
    case Errc::SingularDesign: return "SingularDesign";
    case Errc::DegenerateDesign: return "DegenerateDesign";
    case Errc::OneClassOnly: return "OneClassOnly";
    case Errc::SeparationDetected: return "SeparationDetected";
    case Errc::SingularInformation: return "SingularInformation";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::CorruptModelFile: return "CorruptModelFile";
    case Errc::UnstableLoop: return "UnstableLoop";
    case Errc::AlphabetTooSmall: return "AlphabetTooSmall";
    case Errc::IndivisibleBlocks: return "IndivisibleBlocks";
    case Errc::OutOfOrderRecord: return "OutOfOrderRecord";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::BindFailure: return "BindFailure";
    case Errc::UnpairableRows: return "UnpairableRows";
    case Errc::MalformedFile: return "MalformedFile";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

ErrorClass classify(Errc code) {
  switch (code) {
    case Errc::DegenerateFit:
    case Errc::InvalidFit:
    case Errc::ZeroVariance:
    case Errc::ZeroVarianceColumn:
    case Errc::SingularDesign:
    case Errc::DegenerateDesign:
    case Errc::SeparationDetected:
    case Errc::SingularInformation:
    case Errc::UnstableLoop:
      return ErrorClass::numeric;
    case Errc::InvalidArgument:
      return ErrorClass::usage;
    default:
      return ErrorClass::data;
  }
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace piw
