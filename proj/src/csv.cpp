#include "shotcorr/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>

#include "shotcorr/errors.hpp"

namespace shotcorr {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string csv_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::string::npos;
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (table.header.empty()) {
      table.header = split(line);
      continue;
    }
    std::vector<std::string> fields = split(line);
    if (fields.size() != table.header.size()) {
      throw ConfigError("malformed CSV row at line " + std::to_string(number) + ": expected " +
                        std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(number);
  }
  if (table.header.empty()) throw ConfigError("CSV input is empty");
  return table;
}

double csv_field_double(const CsvTable& table, std::size_t row, std::size_t column) {
  const std::string& s = table.rows.at(row).at(column);
  double value = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("malformed CSV row at line " + std::to_string(table.line_numbers.at(row)) + ": column '" +
                      table.header.at(column) + "' is not a number ('" + s + "')");
  }
  return value;
}

}  // namespace shotcorr
