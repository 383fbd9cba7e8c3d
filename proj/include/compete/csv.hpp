#ifndef COMPETE_CSV_HPP_
#define COMPETE_CSV_HPP_

#include <string>
#include <vector>

namespace compete {

// Shortest round-trip decimal form ("." separator, no locale).
std::string format_double(double x);

std::vector<std::string> split_csv_line(const std::string& line);

double parse_double(const std::string& s);

}  // namespace compete

#endif  // COMPETE_CSV_HPP_
