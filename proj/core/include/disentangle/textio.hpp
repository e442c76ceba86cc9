#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace disent {

// Shortest decimal form that round-trips a double (17 significant digits).
std::string fmt_g17(double v);

std::vector<std::string> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

// Strict scalar parses; throw std::invalid_argument on any leftover text.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);
unsigned long long parse_uint(std::string_view s);

}  // namespace disent
