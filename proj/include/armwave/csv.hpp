#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "armwave/errors.hpp"

namespace armwave {

/// Numeric table with `# key = value` metadata lines ahead of the header.
/// All stage artifacts use this layout. Values are written with %.17g so a
/// write/read round trip returns bit-identical doubles.
struct CsvTable {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t col(std::string_view name) const {
        auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end())
            throw ParseError("missing column '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - columns.begin());
    }

    bool has_col(std::string_view name) const {
        return std::find(columns.begin(), columns.end(), name) != columns.end();
    }

    const std::string* find_meta(std::string_view key) const {
        for (const auto& [k, v] : meta)
            if (k == key)
                return &v;
        return nullptr;
    }

    std::vector<double> column(std::string_view name) const {
        std::size_t c = col(name);
        std::vector<double> out(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            out[i] = rows[i][c];
        return out;
    }
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Write via a temp file and rename so readers never see a partial table.
inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp);
        if (!os)
            throw Error("cannot open '" + tmp.string() + "' for writing");
        for (const auto& [k, v] : t.meta)
            os << "# " << k << " = " << v << "\n";
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            os << (c ? "," : "") << t.columns[c];
        os << "\n";
        for (const auto& row : t.rows) {
            for (std::size_t c = 0; c < row.size(); ++c)
                os << (c ? "," : "") << format_double(row[c]);
            os << "\n";
        }
        if (!os)
            throw Error("short write to '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is)
        throw ParseError("cannot open '" + path.string() + "'");
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            auto eq = body.find('=');
            if (eq != std::string::npos) {
                auto trim = [](std::string s) {
                    auto b = s.find_first_not_of(" \t");
                    auto e = s.find_last_not_of(" \t");
                    return b == std::string::npos ? std::string()
                                                  : s.substr(b, e - b + 1);
                };
                t.meta.emplace_back(trim(body.substr(0, eq)),
                                    trim(body.substr(eq + 1)));
            }
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        if (!have_header) {
            while (std::getline(ss, cell, ','))
                t.columns.push_back(cell);
            have_header = true;
            continue;
        }
        std::vector<double> row;
        row.reserve(t.columns.size());
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str())
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": bad number '" + cell + "'");
            row.push_back(v);
        }
        if (row.size() != t.columns.size())
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": expected " + std::to_string(t.columns.size()) +
                             " fields, got " + std::to_string(row.size()));
        t.rows.push_back(std::move(row));
    }
    if (!have_header)
        throw ParseError(path.string() + ": no header row");
    return t;
}

} // namespace armwave
