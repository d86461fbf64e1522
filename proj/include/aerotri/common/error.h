#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aerotri {

enum class ErrorCode {
  // Input and configuration.
  kConfigError,
  kIoError,
  kParseError,
  kDuplicateImageId,
  kMissingPos,
  kTooFewImages,
  // Feature files and feature data.
  kBadMagic,
  kBadVersion,
  kTruncatedFile,
  kBoundsViolation,
  kInvariantViolation,
  kZeroDescriptor,
  kTooSmall,
  kDimensionMismatch,
  kTooFewDescriptors,
  // Geometry and estimation.
  kOutOfZone,
  kNoConvergence,
  kInsufficientData,
  kInsufficientPoints,
  kDegenerateConfiguration,
  kDegenerateGeometry,
  kChiralityAmbiguous,
  kBehindCamera,
  kNoVisibility,
  // Reconstruction and adjustment.
  kEmptyReconstruction,
  kEmptyPair,
  kNoAdequatePair,
  kSeedFailure,
  kNonFiniteResidual,
  kNumericalFailure,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported through this exception type. The code
// identifies the failure class; the message carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const { return code_; }
  // The message without the code prefix, for re-wrapping with context.
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace aerotri
