#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace phsa::text {

/// Shortest representation that parses back to the identical double.
std::string format(double v);
double parse_double(std::string_view s);
std::uint64_t parse_uint(std::string_view s);
long long parse_int(std::string_view s);
std::vector<std::string_view> split(std::string_view line, char sep);

/// Writes `contents` to `path` via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace phsa::text
