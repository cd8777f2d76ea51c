#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small ASCII string helpers shared by the modules.
namespace s2l::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
// Trims and replaces every internal whitespace run with one space.
std::string collapse_whitespace(std::string_view s);
std::vector<std::string_view> split(std::string_view s, std::string_view delim);
std::vector<std::string_view> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);
int hex_value(char c);

}  // namespace s2l::text
