#include "gsvit/text.hpp"

#include <charconv>
#include <cmath>

#include "gsvit/error.hpp"

namespace gsvit {

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string format_list(const std::vector<std::size_t>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? "," : "") + std::to_string(values[i]);
    }
    return out;
}

std::string format_list(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? "," : "") + format_double(values[i]);
    }
    return out;
}

std::string_view trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

namespace {

[[noreturn]] void bad_value(std::string_view text, std::string_view what, std::string_view expected) {
    throw ConfigError(std::string(what) + ": expected " + std::string(expected) + ", got '" + std::string(text) + "'");
}

std::vector<std::string_view> split_commas(std::string_view text) {
    std::vector<std::string_view> parts;
    text = trim(text);
    if (text.empty()) {
        return parts;
    }
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        parts.push_back(trim(text.substr(start, comma == std::string_view::npos ? comma : comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return parts;
}

}  // namespace

double parse_double(std::string_view text, std::string_view what) {
    const std::string_view t = trim(text);
    double value = 0.0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(value)) {
        bad_value(text, what, "a finite number");
    }
    return value;
}

std::uint64_t parse_u64(std::string_view text, std::string_view what) {
    const std::string_view t = trim(text);
    std::uint64_t value = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        bad_value(text, what, "a non-negative integer");
    }
    return value;
}

bool parse_bool(std::string_view text, std::string_view what) {
    const std::string_view t = trim(text);
    if (t == "true" || t == "1") {
        return true;
    }
    if (t == "false" || t == "0") {
        return false;
    }
    bad_value(text, what, "true or false");
}

std::vector<std::size_t> parse_size_list(std::string_view text, std::string_view what) {
    std::vector<std::size_t> out;
    for (auto part : split_commas(text)) {
        out.push_back(static_cast<std::size_t>(parse_u64(part, what)));
    }
    return out;
}

std::vector<double> parse_double_list(std::string_view text, std::string_view what) {
    std::vector<double> out;
    for (auto part : split_commas(text)) {
        out.push_back(parse_double(part, what));
    }
    return out;
}

std::vector<KeyValue> parse_key_values(std::string_view text, std::string_view origin) {
    std::vector<KeyValue> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        const std::string_view key = eq == std::string_view::npos ? std::string_view{} : trim(line.substr(0, eq));
        if (key.empty()) {
            throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        out.push_back({std::string(key), std::string(trim(line.substr(eq + 1))), line_no});
    }
    return out;
}

}  // namespace gsvit
