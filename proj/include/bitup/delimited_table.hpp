#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bitup {

/// Header row plus same-width data rows, fields split on a single delimiter.
/// No quoting: a field can never contain the delimiter or a newline.
struct DelimitedTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// Source line of each row when parsed from text; empty otherwise.
  std::vector<std::size_t> row_lines;

  std::optional<std::size_t> column_index(std::string_view name) const;
  /// Index of `name`, or a parse error naming the missing column.
  std::size_t require_column(std::string_view name) const;
};

/// Parses text; blank lines are skipped and a trailing "\r" is stripped.
/// Line numbers in errors are 1-based and count the header.
DelimitedTable parse_delimited(std::string_view text, char delimiter = '\t');
DelimitedTable read_delimited(const std::filesystem::path& path, char delimiter = '\t');

/// Rejects rows whose id field is empty, naming the offending line.
void require_ids(const DelimitedTable& table, std::string_view id_column);

std::string format_delimited(const DelimitedTable& table, char delimiter = '\t');

}  // namespace bitup
