#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prognos {

enum class ErrorCode {
  kUnknownColumn,
  kParseError,
  kCategoryError,
  kTooFewRows,
  kMissingOutcome,
  kAllMissingColumn,
  kSchemaMismatch,
  kDegenerateInput,
  kBadParam,
  kShapeMismatch,
  kNoEvents,
  kSingularUpdate,
  kIncompatibleTask,
  kNotSurvivalModel,
  kNonDifferentiableFamily,
  kOneClassOnly,
  kNoComparablePairs,
  kNoUsableSubjects,
  kBadThreshold,
  kDegenerateGroups,
  kEmptySpace,
  kTooFewTrials,
  kEmptyBackground,
  kEmptyFeatureSet,
  kDegenerateSplit,
  kIoError,
  kMissingFile,
  kVersionMismatch,
  kCorruptBundle,
};

std::string_view ErrorCodeName(ErrorCode code);

// Base of every error the engine throws. `code()` is stable and
// machine-readable; `what()` carries the human detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

template <ErrorCode C>
class CodedError : public Error {
 public:
  explicit CodedError(const std::string& message) : Error(C, message) {}
};

using UnknownColumn = CodedError<ErrorCode::kUnknownColumn>;
using ParseError = CodedError<ErrorCode::kParseError>;
using CategoryError = CodedError<ErrorCode::kCategoryError>;
using TooFewRows = CodedError<ErrorCode::kTooFewRows>;
using MissingOutcome = CodedError<ErrorCode::kMissingOutcome>;
using AllMissingColumn = CodedError<ErrorCode::kAllMissingColumn>;
using SchemaMismatch = CodedError<ErrorCode::kSchemaMismatch>;
using DegenerateInput = CodedError<ErrorCode::kDegenerateInput>;
using BadParam = CodedError<ErrorCode::kBadParam>;
using ShapeMismatch = CodedError<ErrorCode::kShapeMismatch>;
using NoEvents = CodedError<ErrorCode::kNoEvents>;
using SingularUpdate = CodedError<ErrorCode::kSingularUpdate>;
using IncompatibleTask = CodedError<ErrorCode::kIncompatibleTask>;
using NotSurvivalModel = CodedError<ErrorCode::kNotSurvivalModel>;
using NonDifferentiableFamily = CodedError<ErrorCode::kNonDifferentiableFamily>;
using OneClassOnly = CodedError<ErrorCode::kOneClassOnly>;
using NoComparablePairs = CodedError<ErrorCode::kNoComparablePairs>;
using NoUsableSubjects = CodedError<ErrorCode::kNoUsableSubjects>;
using BadThreshold = CodedError<ErrorCode::kBadThreshold>;
using DegenerateGroups = CodedError<ErrorCode::kDegenerateGroups>;
using EmptySpace = CodedError<ErrorCode::kEmptySpace>;
using TooFewTrials = CodedError<ErrorCode::kTooFewTrials>;
using EmptyBackground = CodedError<ErrorCode::kEmptyBackground>;
using EmptyFeatureSet = CodedError<ErrorCode::kEmptyFeatureSet>;
using DegenerateSplit = CodedError<ErrorCode::kDegenerateSplit>;
using IoError = CodedError<ErrorCode::kIoError>;
using MissingFile = CodedError<ErrorCode::kMissingFile>;
using VersionMismatch = CodedError<ErrorCode::kVersionMismatch>;
using CorruptBundle = CodedError<ErrorCode::kCorruptBundle>;

}  // namespace prognos
