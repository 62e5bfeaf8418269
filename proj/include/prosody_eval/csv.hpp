#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "prosody_eval/common.hpp"

namespace prosody_eval {

/// Minimal comma-separated table with a mandatory header row. Fields are
/// trimmed; quoting is not supported (none of the schemas need it).
struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based line number of each data row in the source.
  std::vector<std::size_t> lines;

  std::size_t column(std::string_view name) const;
  const std::string& get(std::size_t row, std::string_view name) const;
  long long get_int(std::size_t row, std::string_view name) const;
  double get_double(std::size_t row, std::string_view name) const;

  /// Error naming the source, line and column.
  Error error(std::size_t row, std::string_view column, std::string_view what) const;
};

/// Parses and checks that every required column is present in the header.
CsvTable parse_csv(std::istream& in, const std::vector<std::string>& required, std::string source = "<input>");
CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& required);

}  // namespace prosody_eval
