#pragma once

// Minimal CSV reading for the comma-separated, unquoted files this toolkit
// consumes and writes.

#include <filesystem>
#include <string>
#include <vector>

namespace gscan::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based source line of each row, for error messages.
  std::vector<std::size_t> line_numbers;

  // Index of a header column; throws InvalidInput when absent.
  std::size_t column(const std::string& name) const;
};

std::vector<std::string> split_line(const std::string& line);

// Reads a file with a header row. Blank lines and lines starting with '#'
// are skipped. Every row must have as many fields as the header.
Table read(const std::filesystem::path& path, bool has_header = true);

double parse_double(const std::string& field, const std::string& context);
long long parse_int(const std::string& field, const std::string& context);

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace gscan::csv
