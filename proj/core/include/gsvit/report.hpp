#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gsvit {

// Key-value report text shared by training and benchmark runs:
//
//   key = value
//   series <name> <count>
//   <value>
//   ...
//
// Doubles are written in shortest round-trip form.
struct Report {
    std::vector<std::pair<std::string, std::string>> fields;
    std::vector<std::pair<std::string, std::vector<double>>> series;

    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set_count(const std::string& key, std::size_t value);
    void add_series(const std::string& name, std::vector<double> values);
    // Copies every line of a key-value text under `prefix.`.
    void add_snapshot(const std::string& prefix, std::string_view text);

    const std::string* field(const std::string& key) const;
    const std::vector<double>* find_series(const std::string& name) const;
    // Field as double; DataError when missing or malformed.
    double number(const std::string& key) const;
};

std::string format_report(const Report& report);
Report parse_report(std::string_view text, std::string_view origin = "<report>");

void save_report(const std::filesystem::path& path, const Report& report);
Report load_report(const std::filesystem::path& path);

}  // namespace gsvit
