#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace vcgate::cli {

/// Column-named table of raw string cells.
class Table {
 public:
  Table() = default;
  Table(std::vector<std::string> header, std::vector<std::vector<std::string>> rows);

  std::size_t n_rows() const noexcept { return rows_.size(); }
  const std::vector<std::string>& header() const noexcept { return header_; }
  std::optional<std::size_t> column(const std::string& name) const;
  const std::string& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }

  /// Numeric column; missing or non-numeric cells raise ingestion errors
  /// naming the row (1-based data row) and column.
  std::vector<double> numeric(const std::string& name) const;
  /// String column; missing cells raise ingestion errors.
  std::vector<std::string> text(const std::string& name) const;
  bool is_numeric(const std::string& name) const;

 private:
  std::size_t require(const std::string& name) const;

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// RFC 4180 style: comma separated, optional double quotes with "" escapes,
/// LF or CRLF line ends, header row required.
Table parse_csv(const std::string& text);
Table read_csv(const std::string& path);

bool is_missing(const std::string& cell);

}  // namespace vcgate::cli
