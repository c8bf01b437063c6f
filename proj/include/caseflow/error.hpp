#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace caseflow {

enum class ErrorKind {
  // input / data
  UnknownColumn,
  UnknownCategoryLevel,
  MalformedRow,
  EmptyInput,
  SchemaMismatch,
  MissingCounterfactuals,
  // statistics
  SingleClass,
  LengthMismatch,
  InsufficientClassCount,
  ConstantInput,
  GroupTooLarge,
  EmptyGroup,
  // models
  EmptyNode,
  WidthMismatch,
  MissingScore,
  // configuration
  InvalidConfig,
  InvalidArgument,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownColumn: return "UnknownColumn";
    case ErrorKind::UnknownCategoryLevel: return "UnknownCategoryLevel";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::MissingCounterfactuals: return "MissingCounterfactuals";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InsufficientClassCount: return "InsufficientClassCount";
    case ErrorKind::ConstantInput: return "ConstantInput";
    case ErrorKind::GroupTooLarge: return "GroupTooLarge";
    case ErrorKind::EmptyGroup: return "EmptyGroup";
    case ErrorKind::EmptyNode: return "EmptyNode";
    case ErrorKind::WidthMismatch: return "WidthMismatch";
    case ErrorKind::MissingScore: return "MissingScore";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Data errors come from malformed inputs; everything else is either a bad
/// configuration or a caller contract violation.
inline bool is_data_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownColumn:
    case ErrorKind::UnknownCategoryLevel:
    case ErrorKind::MalformedRow:
    case ErrorKind::EmptyInput:
    case ErrorKind::SchemaMismatch:
    case ErrorKind::MissingCounterfactuals:
    case ErrorKind::SingleClass:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  // row is 1-based over data rows (header excluded), column is 1-based.
  Error(ErrorKind kind, const std::string& message, std::size_t row, std::size_t column)
      : std::runtime_error(std::string(to_string(kind)) + " at row " + std::to_string(row) +
                           ", column " + std::to_string(column) + ": " + message),
        kind_(kind),
        row_(row),
        column_(column) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> row() const noexcept { return row_; }
  std::optional<std::size_t> column() const noexcept { return column_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> row_;
  std::optional<std::size_t> column_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace caseflow
