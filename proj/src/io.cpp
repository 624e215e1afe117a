#include "darkband/io.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "darkband/errors.hpp"

namespace darkband {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) x = 0.0;  // drop the sign of zero
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns)
    : path_(path), n_cols_(columns.size()), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw ResourceError("cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
}

void CsvWriter::row(const std::vector<CsvCell>& cells) {
    if (cells.size() != n_cols_) throw ConfigError("CsvWriter: row width does not match header of " + path_.string());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, double>) out_ << format_double(v);
                else out_ << v;
            },
            cells[i]);
    }
    out_ << '\n';
    if (!out_) throw ResourceError("write failed on " + path_.string());
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw ConfigError("CsvTable: no column '" + name + "'");
}

double CsvTable::value(std::size_t row, const std::string& name) const {
    return std::stod(rows.at(row).at(column(name)));
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
    t.columns = split(line);
    while (std::getline(in, line))
        if (!line.empty()) t.rows.push_back(split(line));
    return t;
}

}  // namespace darkband
