#include "cli/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "vcgate/errors.hpp"

namespace vcgate::cli {

namespace {

std::optional<double> to_number(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return std::nullopt;
  const char* first = s.data() + b;
  const char* last = s.data() + e + 1;
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

Error ingestion(const std::string& msg) { return Error(ErrorKind::ingestion, msg); }

}  // namespace

Table::Table(std::vector<std::string> header, std::vector<std::vector<std::string>> rows)
    : header_(std::move(header)), rows_(std::move(rows)) {}

bool is_missing(const std::string& cell) {
  const auto b = cell.find_first_not_of(" \t");
  if (b == std::string::npos) return true;
  const std::string t = cell.substr(b, cell.find_last_not_of(" \t") - b + 1);
  return t == "NA" || t == "NaN" || t == "nan" || t == "null";
}

std::optional<std::size_t> Table::column(const std::string& name) const {
  for (std::size_t j = 0; j < header_.size(); ++j)
    if (header_[j] == name) return j;
  return std::nullopt;
}

std::size_t Table::require(const std::string& name) const {
  const auto j = column(name);
  if (!j) throw ingestion("column '" + name + "' not found in dataset");
  return *j;
}

std::vector<double> Table::numeric(const std::string& name) const {
  const std::size_t j = require(name);
  std::vector<double> out;
  out.reserve(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const std::string& c = rows_[i][j];
    if (is_missing(c))
      throw ingestion("missing value in column '" + name + "' at row " + std::to_string(i + 1));
    const auto v = to_number(c);
    if (!v)
      throw ingestion("non-numeric value '" + c + "' in column '" + name + "' at row " +
                      std::to_string(i + 1));
    out.push_back(*v);
  }
  return out;
}

std::vector<std::string> Table::text(const std::string& name) const {
  const std::size_t j = require(name);
  std::vector<std::string> out;
  out.reserve(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (is_missing(rows_[i][j]))
      throw ingestion("missing value in column '" + name + "' at row " + std::to_string(i + 1));
    out.push_back(rows_[i][j]);
  }
  return out;
}

bool Table::is_numeric(const std::string& name) const {
  const std::size_t j = require(name);
  for (const auto& row : rows_)
    if (!is_missing(row[j]) && !to_number(row[j])) return false;
  return true;
}

Table parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, any = false;
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
    any = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty())
          throw ingestion("stray quote inside unquoted field on line " + std::to_string(line));
        quoted = true;
        any = true;
        break;
      case ',':
        end_field();
        any = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (quoted) throw ingestion("unterminated quoted field at end of input");
  if (any || !field.empty()) end_record();
  if (records.empty()) throw ingestion("CSV input has no header row");

  std::vector<std::string> header = std::move(records.front());
  records.erase(records.begin());
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].size() != header.size())
      throw ingestion("row " + std::to_string(i + 1) + " has " + std::to_string(records[i].size()) +
                      " fields, header has " + std::to_string(header.size()));
  return Table(std::move(header), std::move(records));
}

Table read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ingestion("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace vcgate::cli
