#include "aerotri/common/error.h"

namespace aerotri {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateImageId: return "DuplicateImageId";
    case ErrorCode::kMissingPos: return "MissingPos";
    case ErrorCode::kTooFewImages: return "TooFewImages";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kBadVersion: return "BadVersion";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kBoundsViolation: return "BoundsViolation";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kZeroDescriptor: return "ZeroDescriptor";
    case ErrorCode::kTooSmall: return "TooSmall";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kTooFewDescriptors: return "TooFewDescriptors";
    case ErrorCode::kOutOfZone: return "OutOfZone";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kInsufficientPoints: return "InsufficientPoints";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::kChiralityAmbiguous: return "ChiralityAmbiguous";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kNoVisibility: return "NoVisibility";
    case ErrorCode::kEmptyReconstruction: return "EmptyReconstruction";
    case ErrorCode::kEmptyPair: return "EmptyPair";
    case ErrorCode::kNoAdequatePair: return "NoAdequatePair";
    case ErrorCode::kSeedFailure: return "SeedFailure";
    case ErrorCode::kNonFiniteResidual: return "NonFiniteResidual";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

}  // namespace aerotri
