#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Small helpers shared by the line-based file formats.
namespace p5 {

std::vector<std::string_view> split_lines(std::string_view text);
std::string_view trim(std::string_view s);
// Drops everything from the first '#' and trims whitespace.
std::string_view strip_comment(std::string_view line);
std::vector<std::string_view> split_fields(std::string_view line);

// Throw ParseError(line, ...) naming `what` on malformed input.
std::size_t parse_index(std::string_view field, std::size_t line, std::string_view what);
long long parse_integer(std::string_view field, std::size_t line, std::string_view what);
double parse_real(std::string_view field, std::size_t line, std::string_view what);

// Shortest representation that parses back to the identical double.
std::string format_shortest(double value);
// Scientific notation with 10 fractional digits, e.g. -1.2500000000e+00.
std::string format_sci10(double value);

}  // namespace p5
