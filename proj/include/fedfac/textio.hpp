#pragma once

#include <string>
#include <vector>

namespace fedfac {

/// Shortest round-trip decimal representation of a double. All CSV and JSON
/// emitted by this project goes through here so reruns are byte-identical.
std::string format_double(double value);

std::vector<std::string> split_line(const std::string& line, char sep = ',');

double parse_double(const std::string& text);
long long parse_int(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace fedfac
