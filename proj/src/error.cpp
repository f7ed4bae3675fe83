#include "mvrad/error.hpp"

namespace mvrad {

ErrorCategory category_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigNotFound:
    case ErrorKind::SchemaViolation:
      return ErrorCategory::Config;
    case ErrorKind::FileUnreadable:
    case ErrorKind::MalformedCsv:
    case ErrorKind::DuplicateSubjectId:
    case ErrorKind::NoFeatureColumns:
    case ErrorKind::EmptyCohort:
    case ErrorKind::AllMissingInTrain:
    case ErrorKind::InsufficientClass:
    case ErrorKind::DegenerateLabels:
    case ErrorKind::InsufficientData:
    case ErrorKind::EmptyTrainingSet:
    case ErrorKind::SingleClassTraining:
    case ErrorKind::SingleClassLabels:
    case ErrorKind::DegenerateInput:
      return ErrorCategory::Data;
    case ErrorKind::NonFiniteValue:
    case ErrorKind::NonFiniteGradient:
    case ErrorKind::NonFiniteLoss:
      return ErrorCategory::Numeric;
    case ErrorKind::ShapeMismatch:
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidRate:
    case ErrorKind::EmptyNode:
    case ErrorKind::IoError:
      return ErrorCategory::Internal;
  }
  return ErrorCategory::Internal;
}

std::string_view kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigNotFound: return "ConfigNotFound";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::FileUnreadable: return "FileUnreadable";
    case ErrorKind::MalformedCsv: return "MalformedCsv";
    case ErrorKind::DuplicateSubjectId: return "DuplicateSubjectId";
    case ErrorKind::NoFeatureColumns: return "NoFeatureColumns";
    case ErrorKind::EmptyCohort: return "EmptyCohort";
    case ErrorKind::AllMissingInTrain: return "AllMissingInTrain";
    case ErrorKind::InsufficientClass: return "InsufficientClass";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::SingleClassTraining: return "SingleClassTraining";
    case ErrorKind::SingleClassLabels: return "SingleClassLabels";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidRate: return "InvalidRate";
    case ErrorKind::EmptyNode: return "EmptyNode";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Numeric: return 4;
    case ErrorCategory::Internal: return 1;
  }
  return 1;
}

}  // namespace mvrad
