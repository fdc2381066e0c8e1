#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cgm/core/error.hpp"

namespace cgm::experiments {

/// Plain comma-separated table (no quoting; none of our fields need it).
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] int column(const std::string &name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return static_cast<int>(i);
            }
        }
        return -1;
    }
};

inline std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, ',')) {
        out.push_back(cur);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

inline Table read_table(std::istream &is) {
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw ParseError("expected " + std::to_string(t.header.size()) + " columns, got " +
                                 std::to_string(fields.size()),
                             lineno);
        }
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty()) {
        throw ParseError("empty CSV file");
    }
    return t;
}

inline Table read_table(const std::string &path) {
    std::ifstream is(path);
    CGM_REQUIRE(is, ConfigError, "cannot open " + path);
    try {
        return read_table(is);
    } catch (const ParseError &e) {
        throw ParseError(path + ": " + e.what());
    }
}

} // namespace cgm::experiments
