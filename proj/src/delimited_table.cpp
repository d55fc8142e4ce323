#include "bitup/delimited_table.hpp"

#include "bitup/error.hpp"
#include "bitup/file_io.hpp"

namespace bitup {
namespace {

std::vector<std::string> split(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      return fields;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

std::optional<std::size_t> DelimitedTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t DelimitedTable::require_column(std::string_view name) const {
  if (auto idx = column_index(name)) return *idx;
  throw ParseError(1, 0, "column '" + std::string(name) + "' not found in header");
}

DelimitedTable parse_delimited(std::string_view text, char delimiter) {
  DelimitedTable table;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool have_header = false;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fields = split(line, delimiter);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].empty()) {
          throw ParseError(line_no, 0, "line " + std::to_string(line_no) + ": empty column name");
        }
        for (std::size_t j = 0; j < i; ++j) {
          if (fields[j] == fields[i]) {
            throw ParseError(line_no, 0,
                             "line " + std::to_string(line_no) + ": duplicate column '" +
                                 fields[i] + "'");
          }
        }
      }
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ParseError(line_no, 0,
                       "line " + std::to_string(line_no) + ": expected " +
                           std::to_string(table.header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.row_lines.push_back(line_no);
  }
  if (!have_header) throw ParseError(1, 0, "line 1: missing header row");
  return table;
}

DelimitedTable read_delimited(const std::filesystem::path& path, char delimiter) {
  return parse_delimited(read_text_file(path), delimiter);
}

void require_ids(const DelimitedTable& table, std::string_view id_column) {
  const std::size_t col = table.require_column(id_column);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r][col].empty()) {
      const std::size_t line = r < table.row_lines.size() ? table.row_lines[r] : r + 2;
      throw ParseError(line, 0, "line " + std::to_string(line) + ": empty id field");
    }
  }
}

std::string format_delimited(const DelimitedTable& table, char delimiter) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out.push_back(delimiter);
      out += fields[i];
    }
    out.push_back('\n');
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
  return out;
}

}  // namespace bitup
