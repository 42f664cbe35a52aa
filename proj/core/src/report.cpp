#include "gsvit/report.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "gsvit/error.hpp"
#include "gsvit/text.hpp"

namespace gsvit {

void Report::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : fields) {
        if (k == key) {
            v = value;
            return;
        }
    }
    fields.emplace_back(key, value);
}

void Report::set(const std::string& key, double value) { set(key, format_double(value)); }

void Report::set_count(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }

void Report::add_series(const std::string& name, std::vector<double> values) {
    series.emplace_back(name, std::move(values));
}

void Report::add_snapshot(const std::string& prefix, std::string_view text) {
    for (const auto& kv : parse_key_values(text, prefix)) {
        set(prefix + "." + kv.key, kv.value);
    }
}

const std::string* Report::field(const std::string& key) const {
    for (const auto& [k, v] : fields) {
        if (k == key) {
            return &v;
        }
    }
    return nullptr;
}

const std::vector<double>* Report::find_series(const std::string& name) const {
    for (const auto& [n, v] : series) {
        if (n == name) {
            return &v;
        }
    }
    return nullptr;
}

double Report::number(const std::string& key) const {
    const std::string* v = field(key);
    if (v == nullptr) {
        throw DataError("report has no field '" + key + "'");
    }
    try {
        return parse_double(*v, key);
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
}

std::string format_report(const Report& report) {
    std::string out;
    for (const auto& [k, v] : report.fields) {
        out += k + " = " + v + "\n";
    }
    for (const auto& [name, values] : report.series) {
        out += "series " + name + " " + std::to_string(values.size()) + "\n";
        for (double x : values) {
            out += format_double(x) + "\n";
        }
    }
    return out;
}

Report parse_report(std::string_view text, std::string_view origin) {
    Report report;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw DataError(std::string(origin) + ":" + std::to_string(line_no) + ": " + what);
    };
    try {
        while (std::getline(in, line)) {
            ++line_no;
            const std::string_view t = trim(line);
            if (t.empty() || t.front() == '#') {
                continue;
            }
            if (t.rfind("series ", 0) == 0) {
                std::istringstream head{std::string(t.substr(7))};
                std::string name, count_text;
                if (!(head >> name >> count_text)) {
                    fail("malformed series header");
                }
                const std::uint64_t count = parse_u64(count_text, "series count");
                std::vector<double> values;
                values.reserve(count);
                for (std::uint64_t i = 0; i < count; ++i) {
                    if (!std::getline(in, line)) {
                        fail("series " + name + " ends after " + std::to_string(i) + " of " +
                             std::to_string(count) + " values");
                    }
                    ++line_no;
                    values.push_back(parse_double(line, "series value"));
                }
                report.add_series(name, std::move(values));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string_view::npos) {
                fail("expected 'key = value'");
            }
            report.set(std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))));
        }
    } catch (const ConfigError& e) {
        fail(e.what());
    }
    return report;
}

void save_report(const std::filesystem::path& path, const Report& report) {
    std::ofstream out(path, std::ios::trunc);
    out << format_report(report);
    if (!out) {
        throw DataError(path.string() + ": cannot write report");
    }
}

Report load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(path.string() + ": cannot open report");
    }
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_report(text, path.string());
}

}  // namespace gsvit
