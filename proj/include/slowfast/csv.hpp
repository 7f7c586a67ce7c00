#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "slowfast/error.hpp"
#include "slowfast/format.hpp"

namespace slowfast {

/// Numeric table with `#`-prefixed metadata lines and a header row.
struct CsvTable {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add_meta(std::string key, std::string value) { meta.emplace_back(std::move(key), std::move(value)); }
    void add_meta(std::string key, double value) { meta.emplace_back(std::move(key), fmt::num(value)); }

    void add_row(std::vector<double> row) {
        require(row.size() == columns.size(), ErrorCode::InvalidArgument, "csv row width mismatch");
        rows.push_back(std::move(row));
    }

    [[nodiscard]] std::string str() const {
        std::ostringstream os;
        for (const auto& [k, v] : meta) os << "# " << k << " = " << v << '\n';
        for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << fmt::num(r[i]);
            os << '\n';
        }
        return os.str();
    }

    void write(const std::string& path) const;
};

/// Tidy long-format plot data: one (series, x, value) row per point.
struct PlotData {
    std::vector<std::pair<std::string, std::string>> meta;
    std::string x_name = "x";
    std::vector<std::tuple<std::string, double, double>> rows;

    void add(std::string series, double x, double value) { rows.emplace_back(std::move(series), x, value); }

    [[nodiscard]] std::string str() const {
        std::ostringstream os;
        for (const auto& [k, v] : meta) os << "# " << k << " = " << v << '\n';
        os << "series," << x_name << ",value\n";
        for (const auto& [s, x, v] : rows) os << s << ',' << fmt::num(x) << ',' << fmt::num(v) << '\n';
        return os.str();
    }
};

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::ConfigError, "cannot open " + path + " for writing");
    out << text;
}

inline void CsvTable::write(const std::string& path) const { write_text(path, str()); }

}  // namespace slowfast
