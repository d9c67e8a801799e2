#include "repfactor/error.hpp"

namespace repfactor {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DanglingPath: return "DanglingPath";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::RowCountMismatch: return "RowCountMismatch";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::MissingEntry: return "MissingEntry";
    case ErrorCode::RankTooLarge: return "RankTooLarge";
    case ErrorCode::EmptySliceList: return "EmptySliceList";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::ZeroInput: return "ZeroInput";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyVector: return "EmptyVector";
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ConstantInput: return "ConstantInput";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::InvalidP: return "InvalidP";
    case ErrorCode::InvalidQ: return "InvalidQ";
    case ErrorCode::NonPositiveReference: return "NonPositiveReference";
    case ErrorCode::MissingProfile: return "MissingProfile";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::Usage: return "Usage";
    case ErrorCode::MissingStage: return "MissingStage";
  }
  return "Unknown";
}

int exit_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Usage:
    case ErrorCode::MissingStage:
      return 1;
    case ErrorCode::NumericalBreakdown:
    case ErrorCode::ZeroInput:
    case ErrorCode::ZeroVariance:
    case ErrorCode::DegenerateSample:
      return 3;
    default:
      return 2;
  }
}

}  // namespace repfactor
