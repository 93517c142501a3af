#pragma once

// Helpers for the key=value text formats.

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "astnet/errors.hpp"

namespace astnet::text {

inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string join(const std::vector<std::size_t>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(xs[i]);
    }
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Whole-string parses; stoul alone accepts "-3" and "7x".
inline std::size_t to_size(const std::string& v) {
    std::size_t used = 0;
    if (v.empty() || v.front() == '-' || v.front() == '+') throw std::invalid_argument(v);
    const unsigned long long n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
}

inline double to_real(const std::string& v) {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
}

inline std::vector<std::size_t> split_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(to_size(trim(item)));
    return out;
}

inline bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw UsageError("expected a boolean, got '" + v + "'");
}


// Calls fn(key, value, line_no) for each non-blank, non-comment line.
template <typename Fn>
void for_each_entry(const std::string& body, const char* what, Fn&& fn) {
    std::stringstream ss(body);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(std::string(what) + " line " + std::to_string(line_no) + " lacks '='", 0);
        fn(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no);
    }
}

}  // namespace astnet::text
