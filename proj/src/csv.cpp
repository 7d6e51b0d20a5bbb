#include "gscan/csv.hpp"

#include <charconv>
#include <fstream>
#include <system_error>

#include "gscan/core.hpp"

namespace gscan::csv {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  fail(ErrorCode::kInvalidInput, "missing column '" + name + "'");
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

Table read(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool header_done = !has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB &&
        static_cast<unsigned char>(line[2]) == 0xBF) {
      line.erase(0, 3);
    }
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto fields = split_line(t);
    if (!header_done) {
      table.header = std::move(fields);
      header_done = true;
      continue;
    }
    if (has_header && fields.size() != table.header.size()) {
      fail(ErrorCode::kInvalidInput,
           path.string() + ":" + std::to_string(line_no) + ": expected " +
               std::to_string(table.header.size()) + " fields, found " +
               std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (has_header && !header_done) {
    fail(ErrorCode::kInvalidInput, path.string() + ": empty file");
  }
  return table;
}

double parse_double(const std::string& field, const std::string& context) {
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    fail(ErrorCode::kInvalidInput,
         context + ": not a number: '" + field + "'");
  }
  return value;
}

long long parse_int(const std::string& field, const std::string& context) {
  long long value = 0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    // Accept integral values written in floating-point form ("12.0").
    const double d = parse_double(field, context);
    if (d != static_cast<double>(static_cast<long long>(d))) {
      fail(ErrorCode::kInvalidInput,
           context + ": not an integer: '" + field + "'");
    }
    return static_cast<long long>(d);
  }
  return value;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return std::to_string(value);
  return std::string(buf, ptr);
}

}  // namespace gscan::csv
