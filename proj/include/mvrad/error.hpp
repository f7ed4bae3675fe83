#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvrad {

enum class ErrorKind {
  // configuration
  ConfigNotFound,
  SchemaViolation,
  // data
  FileUnreadable,
  MalformedCsv,
  DuplicateSubjectId,
  NoFeatureColumns,
  EmptyCohort,
  AllMissingInTrain,
  InsufficientClass,
  DegenerateLabels,
  InsufficientData,
  EmptyTrainingSet,
  SingleClassTraining,
  SingleClassLabels,
  DegenerateInput,
  // numerics
  NonFiniteValue,
  NonFiniteGradient,
  NonFiniteLoss,
  // programming / environment
  ShapeMismatch,
  InvalidArgument,
  InvalidRate,
  EmptyNode,
  IoError,
};

enum class ErrorCategory { Config, Data, Numeric, Internal };

ErrorCategory category_of(ErrorKind kind);
std::string_view kind_name(ErrorKind kind);

/// Process exit code for a failure category: config 2, data 3, numeric 4, other 1.
int exit_code(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(kind_name(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace mvrad
