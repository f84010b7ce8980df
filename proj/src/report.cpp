#include "bbm/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "bbm/error.hpp"

namespace bbm {

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size())
    throw Error(ErrorCode::BadArgs, "row width does not match table " + name);
  rows.push_back(std::move(row));
}

const Table& Report::table(const std::string& name) const {
  for (const auto& t : tables)
    if (t.name == name) return t;
  throw Error(ErrorCode::BadArgs, "no table named " + name);
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

namespace {

std::string field(const Cell& cell) {
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&cell)) return format_number(*d);
  const auto& text = std::get<std::string>(cell);
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string quoted = "\"";
  for (const char c : text) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + '"';
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  out << text;
  out.close();
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

}  // namespace

std::string to_csv(const Table& table) {
  std::string out;
  auto line = [&](const auto& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out += ',';
      out += field(Cell(cells[i]));
    }
    out += "\r\n";
  };
  line(table.columns);
  for (const auto& row : table.rows) line(row);
  return out;
}

void emit(const Report& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& table : report.tables) write_file(dir / (table.name + ".csv"), to_csv(table));
  write_file(dir / "summary.json", report.summary.dump(2) + "\n");
}

}  // namespace bbm
