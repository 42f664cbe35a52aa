#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gsvit {

// Shortest decimal string that parses back to the same double.
std::string format_double(double value);
std::string format_list(const std::vector<std::size_t>& values);
std::string format_list(const std::vector<double>& values);

// Strict parsers: the whole (trimmed) field must be consumed. Throw ConfigError
// with `what` in the message.
double parse_double(std::string_view text, std::string_view what);
std::uint64_t parse_u64(std::string_view text, std::string_view what);
bool parse_bool(std::string_view text, std::string_view what);
std::vector<std::size_t> parse_size_list(std::string_view text, std::string_view what);
std::vector<double> parse_double_list(std::string_view text, std::string_view what);

std::string_view trim(std::string_view text);

struct KeyValue {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

// Reads `key = value` lines, skipping blanks and `#` comments. Malformed
// lines throw ConfigError naming origin and line number.
std::vector<KeyValue> parse_key_values(std::string_view text, std::string_view origin);

}  // namespace gsvit
