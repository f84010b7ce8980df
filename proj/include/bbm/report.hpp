#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <variant>
#include <vector>

namespace bbm {

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  /// Throws BadArgs when the row width does not match the header.
  void add(std::vector<Cell> row);
};

struct Report {
  std::vector<Table> tables;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();

  const Table& table(const std::string& name) const;
};

/// Shortest round-trip decimal form; non-finite values become nan, inf, -inf.
std::string format_number(double value);

/// RFC-4180 text: header line then one line per row, CRLF line ends, fields
/// quoted when they contain a comma, quote or line break.
std::string to_csv(const Table& table);

/// Writes <dir>/<table>.csv for every table and <dir>/summary.json. Creates
/// dir if needed; throws IoError on any failure.
void emit(const Report& report, const std::filesystem::path& dir);

}  // namespace bbm
