#include "evtraffic/table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "evtraffic/error.hpp"

namespace evtraffic {
namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    fields.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

Table::Table(std::vector<std::string> header, std::vector<Row> rows, std::string source)
    : header_(std::move(header)), rows_(std::move(rows)), source_(std::move(source)) {}

Table Table::parse(std::istream& in, std::string source) {
  std::vector<std::string> header;
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (!have_header) {
      header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != header.size()) {
      throw ValidationError({source + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, found " + std::to_string(fields.size())});
    }
    rows.push_back({line_no, std::move(fields)});
  }
  if (!have_header) {
    throw ValidationError({source + ": missing header row"});
  }
  return Table(std::move(header), std::move(rows), std::move(source));
}

Table Table::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return parse(in, path.string());
}

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  return std::nullopt;
}

void Table::require_columns(std::initializer_list<std::string_view> required,
                            std::initializer_list<std::string_view> optional) const {
  std::vector<std::string> problems;
  for (auto name : required) {
    if (!has_column(name)) problems.push_back(source_ + ": missing column '" + std::string(name) + "'");
  }
  for (const auto& h : header_) {
    bool known = false;
    for (auto name : required) known = known || name == h;
    for (auto name : optional) known = known || name == h;
    if (!known) problems.push_back(source_ + ": unexpected column '" + h + "'");
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

const std::string& Table::cell(const Row& row, std::string_view name) const {
  const auto col = column(name);
  if (!col) throw ValidationError({source_ + ": missing column '" + std::string(name) + "'"});
  return row.fields[*col];
}

double Table::number(const Row& row, std::string_view name) const {
  const auto& text = cell(row, name);
  try {
    return parse_number(text);
  } catch (const std::invalid_argument&) {
    throw ValidationError({where(row) + ": column '" + std::string(name) + "' is not a number: '" + text + "'"});
  }
}

std::optional<double> Table::optional_number(const Row& row, std::string_view name) const {
  if (!has_column(name) || cell(row, name).empty()) return std::nullopt;
  return number(row, name);
}

long Table::integer(const Row& row, std::string_view name) const {
  const auto& text = cell(row, name);
  long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError({where(row) + ": column '" + std::string(name) + "' is not an integer: '" + text + "'"});
  }
  return value;
}

std::string Table::where(const Row& row) const { return source_ + ":" + std::to_string(row.line); }

std::string format_number(double value) {
  if (value == 0.0) return "0";  // folds -0
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_number failed");
  return std::string(buf, ptr);
}

double parse_number(std::string_view text) {
  double value = 0.0;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return value;
}

TableWriter::TableWriter(std::vector<std::string> header) : header_(std::move(header)) {}

TableWriter& TableWriter::row(std::vector<std::string> fields) {
  if (fields.size() != header_.size()) {
    throw std::logic_error("TableWriter: row width mismatch");
  }
  for (const auto& f : fields) {
    if (f.find_first_of(",\"\n\r") != std::string::npos) {
      throw ValidationError({"field cannot be written to a delimited table: '" + f + "'"});
    }
  }
  rows_.push_back(std::move(fields));
  return *this;
}

std::string TableWriter::str() const {
  std::string out;
  auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += fields[i];
    }
    out += '\n';
  };
  emit(header_);
  for (const auto& r : rows_) emit(r);
  return out;
}

void TableWriter::write(const std::filesystem::path& path) const { write_text_file(path, str()); }

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace evtraffic
