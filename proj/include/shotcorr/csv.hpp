#pragma once

// Minimal CSV helpers shared by the exporters and the command-line tools.

#include <iosfwd>
#include <string>
#include <vector>

namespace shotcorr {

// Shortest round-trippable decimal form of x.
std::string csv_number(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  // Index of a column, or npos.
  std::size_t column(const std::string& name) const;
};

// Comma-separated, no quoting. Blank lines are skipped; a row whose field
// count differs from the header throws ConfigError naming the line.
CsvTable read_csv(std::istream& in);

// Parses a numeric field; throws ConfigError naming line and column.
double csv_field_double(const CsvTable& table, std::size_t row, std::size_t column);

}  // namespace shotcorr
