#pragma once

#include <string>
#include <vector>

namespace kunet {

/// Shortest round-trip decimal form of a double ("0.3", not
/// "0.29999999999999999"). Deterministic, parse-exact.
std::string format_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);

/// Comma-separated list of positive integers ("8,8" -> {8, 8}).
std::vector<std::size_t> parse_size_list(const std::string& text);

}  // namespace kunet
