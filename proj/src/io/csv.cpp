#include <charconv>
#include <fstream>

#include "prosody_eval/csv.hpp"

namespace prosody_eval {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return c;
  throw Error(source + ": missing column '" + std::string(name) + "'");
}

const std::string& CsvTable::get(std::size_t row, std::string_view name) const {
  return rows.at(row).at(column(name));
}

long long CsvTable::get_int(std::size_t row, std::string_view name) const {
  const std::string& text = get(row, name);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw error(row, name, "expected an integer, got '" + text + "'");
  return value;
}

double CsvTable::get_double(std::size_t row, std::string_view name) const {
  const std::string& text = get(row, name);
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw error(row, name, "expected a number, got '" + text + "'");
  }
}

Error CsvTable::error(std::size_t row, std::string_view col, std::string_view what) const {
  return Error(source + ": line " + std::to_string(lines.at(row)) + ", column '" + std::string(col) +
               "': " + std::string(what));
}

CsvTable parse_csv(std::istream& in, const std::vector<std::string>& required, std::string source) {
  CsvTable table;
  table.source = std::move(source);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw Error(table.source + ": line " + std::to_string(line_no) + ": expected " +
                  std::to_string(table.header.size()) + " fields, got " + std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
    table.lines.push_back(line_no);
  }
  if (!have_header) throw Error(table.source + ": empty CSV (no header)");
  for (const auto& name : required) (void)table.column(name);
  return table;
}

CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& required) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_csv(in, required, path.string());
}

}  // namespace prosody_eval
