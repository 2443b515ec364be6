#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evtraffic {

// Comma-delimited text with a header row. Fields are unquoted; identifiers
// containing commas, quotes or newlines are rejected on write.
class Table {
 public:
  struct Row {
    std::size_t line = 0;  // 1-based line number in the source file
    std::vector<std::string> fields;
  };

  Table() = default;
  Table(std::vector<std::string> header, std::vector<Row> rows, std::string source = {});

  static Table parse(std::istream& in, std::string source);
  static Table read(const std::filesystem::path& path);

  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  const std::string& source() const noexcept { return source_; }

  std::optional<std::size_t> column(std::string_view name) const;
  bool has_column(std::string_view name) const { return column(name).has_value(); }

  // Throws ValidationError listing every required column that is missing and
  // every column that is neither required nor optional.
  void require_columns(std::initializer_list<std::string_view> required,
                       std::initializer_list<std::string_view> optional = {}) const;

  const std::string& cell(const Row& row, std::string_view column) const;
  double number(const Row& row, std::string_view column) const;
  std::optional<double> optional_number(const Row& row, std::string_view column) const;
  long integer(const Row& row, std::string_view column) const;

  // "file:line" prefix for diagnostics.
  std::string where(const Row& row) const;

 private:
  std::vector<std::string> header_;
  std::vector<Row> rows_;
  std::string source_;
};

// Shortest decimal representation that parses back to the same double.
std::string format_number(double value);
double parse_number(std::string_view text);

class TableWriter {
 public:
  explicit TableWriter(std::vector<std::string> header);

  TableWriter& row(std::vector<std::string> fields);
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Writes the whole string atomically (temp file + rename).
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace evtraffic
