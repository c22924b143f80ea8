#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace evbs {

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

// Throw Error(parse) naming `line` when the field is not a complete number.
double parse_double(std::string_view s, int line);
std::uint64_t parse_uint(std::string_view s, int line);

// Shortest representation that reads back to the same double; "nan", "inf", "-inf".
std::string format_double(double x);

}  // namespace evbs
