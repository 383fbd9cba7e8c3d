#include "compete/csv.hpp"

#include <charconv>
#include <stdexcept>
#include <system_error>

namespace compete {

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (start <= line.size()) {
    size_t pos = line.find(',', start);
    if (pos == std::string::npos) pos = line.size();
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

double parse_double(const std::string& s) {
  double value = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("bad number in CSV: '" + s + "'");
  return value;
}

}  // namespace compete
