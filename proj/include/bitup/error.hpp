#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bitup {

enum class ErrorCode {
  invalid_argument,
  corruption,
  io_failure,
  capacity_overflow,
  partition_exhausted,
  plan_mismatch,
  out_of_range,
  duplicate_name,
  duplicate_tablet,
  dangling_column,
  unknown_entity,
  lineage_cycle,
  lifecycle_violation,
  not_ready,
  incomplete_tablet_set,
  missing_reverse_mapping,
  parse_error,
  nothing_to_build,
};

std::string_view to_string(ErrorCode code) noexcept;

/// All library failures surface as this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Syntax error in a delimited table or a query expression. line is 1-based
/// (0 for single-line inputs), column is a 0-based byte offset.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : Error(ErrorCode::parse_error, message), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace bitup
