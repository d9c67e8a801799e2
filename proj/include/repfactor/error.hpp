#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace repfactor {

enum class ErrorCode {
  // model_io
  MissingFile,
  BadMagic,
  TruncatedPayload,
  NonFiniteValue,
  IoFailure,
  ParseError,
  DanglingPath,
  DimensionMismatch,
  EmptyCorpus,
  // covariance
  RowCountMismatch,
  DegenerateSample,
  MissingEntry,
  // parafac2
  RankTooLarge,
  EmptySliceList,
  NumericalBreakdown,
  ZeroInput,
  IndexOutOfRange,
  ShapeMismatch,
  // signatures
  EmptyVector,
  DuplicateCell,
  // stats
  LengthMismatch,
  ConstantInput,
  TooFewPoints,
  ZeroVariance,
  InvalidP,
  InvalidQ,
  NonPositiveReference,
  MissingProfile,
  // phylo
  ZeroVector,
  UnknownLabel,
  // cli
  Usage,
  MissingStage,
};

std::string_view error_name(ErrorCode code) noexcept;

/// Process exit status for an error: 1 usage, 2 data, 3 numerical failure.
int exit_status(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code), detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace repfactor
