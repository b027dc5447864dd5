#include "prognos/error.h"

namespace prognos {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownColumn: return "UnknownColumn";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kCategoryError: return "CategoryError";
    case ErrorCode::kTooFewRows: return "TooFewRows";
    case ErrorCode::kMissingOutcome: return "MissingOutcome";
    case ErrorCode::kAllMissingColumn: return "AllMissingColumn";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kBadParam: return "BadParam";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNoEvents: return "NoEvents";
    case ErrorCode::kSingularUpdate: return "SingularUpdate";
    case ErrorCode::kIncompatibleTask: return "IncompatibleTask";
    case ErrorCode::kNotSurvivalModel: return "NotSurvivalModel";
    case ErrorCode::kNonDifferentiableFamily: return "NonDifferentiableFamily";
    case ErrorCode::kOneClassOnly: return "OneClassOnly";
    case ErrorCode::kNoComparablePairs: return "NoComparablePairs";
    case ErrorCode::kNoUsableSubjects: return "NoUsableSubjects";
    case ErrorCode::kBadThreshold: return "BadThreshold";
    case ErrorCode::kDegenerateGroups: return "DegenerateGroups";
    case ErrorCode::kEmptySpace: return "EmptySpace";
    case ErrorCode::kTooFewTrials: return "TooFewTrials";
    case ErrorCode::kEmptyBackground: return "EmptyBackground";
    case ErrorCode::kEmptyFeatureSet: return "EmptyFeatureSet";
    case ErrorCode::kDegenerateSplit: return "DegenerateSplit";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kCorruptBundle: return "CorruptBundle";
  }
  return "Error";
}

}  // namespace prognos
