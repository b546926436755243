#include "descent/csv.hpp"

#include "descent/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

namespace descent {

namespace fs = std::filesystem;

Index CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("column '" + name + "' not found");
    return static_cast<Index>(it - header.begin());
}

namespace {

std::vector<std::string> split_record(const std::string& line, const std::string& origin, std::size_t line_no) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    if (quoted) throw ValidationError(origin + ":" + std::to_string(line_no) + ": unterminated quote");
    out.push_back(std::move(cell));
    return out;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = split_record(line, origin, line_no);
        for (auto& c : cells) c = trim(c);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw ValidationError(origin + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
        }
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw ValidationError(origin + ": empty file");
    return t;
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), path.string());
}

std::string format_csv(const CsvTable& table) {
    std::string out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) out += ',';
            out += quote_if_needed(cells[i]);
        }
        out += '\n';
    };
    emit(table.header);
    for (const auto& r : table.rows) emit(r);
    return out;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

void write_csv(const fs::path& path, const CsvTable& table) { write_file_atomic(path, format_csv(table)); }

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& cell, const std::string& context) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (cell.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
        throw ValidationError(context + ": '" + cell + "' is not a finite number");
    }
    return v;
}

NumericTable to_numeric(const CsvTable& table, const std::string& origin) {
    NumericTable t;
    t.names = table.header;
    t.values.resize(static_cast<Index>(table.rows.size()), static_cast<Index>(table.header.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            t.values(static_cast<Index>(r), static_cast<Index>(c)) = parse_double(
                table.rows[r][c], origin + " row " + std::to_string(r + 1) + " column '" + table.header[c] + "'");
        }
    }
    return t;
}

CsvTable from_numeric(const NumericTable& table) {
    CsvTable t;
    t.header = table.names;
    for (Index r = 0; r < table.values.rows(); ++r) {
        std::vector<std::string> row;
        for (Index c = 0; c < table.values.cols(); ++c) row.push_back(format_double(table.values(r, c)));
        t.rows.push_back(std::move(row));
    }
    return t;
}

RegressionDataset read_tabular(const fs::path& path, const std::string& outcome) {
    const CsvTable csv = read_csv(path);
    if (csv.rows.empty()) throw ValidationError(path.string() + ": no observations");
    const NumericTable num = to_numeric(csv, path.string());
    const auto it = std::find(num.names.begin(), num.names.end(), outcome);
    if (it == num.names.end()) throw ValidationError(path.string() + ": outcome column '" + outcome + "' not found");
    const Index y_col = static_cast<Index>(it - num.names.begin());
    if (num.names.size() < 2) throw ValidationError(path.string() + ": no covariate columns");
    Matrix x(num.values.rows(), num.values.cols() - 1);
    std::vector<std::string> names;
    for (Index c = 0, o = 0; c < num.values.cols(); ++c) {
        if (c == y_col) continue;
        x.col(o++) = num.values.col(c);
        names.push_back(num.names[static_cast<std::size_t>(c)]);
    }
    return RegressionDataset(std::move(x), num.values.col(y_col), std::move(names));
}

void write_tabular(const fs::path& path, const RegressionDataset& data, const std::string& outcome) {
    NumericTable t;
    t.names = data.column_names;
    if (t.names.empty()) {
        for (Index c = 0; c < data.k(); ++c) t.names.push_back("x" + std::to_string(c + 1));
    }
    t.names.push_back(outcome);
    t.values.resize(data.n(), data.k() + 1);
    t.values.leftCols(data.k()) = data.x;
    t.values.col(data.k()) = data.y;
    write_csv(path, from_numeric(t));
}

namespace {

bool all_numeric(const std::vector<std::string>& labels) {
    for (const auto& s : labels) {
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) return false;
    }
    return true;
}

void sort_periods(std::vector<std::string>& periods) {
    if (all_numeric(periods)) {
        std::sort(periods.begin(), periods.end(), [](const std::string& a, const std::string& b) {
            return parse_double(a, "period") < parse_double(b, "period");
        });
    } else {
        std::sort(periods.begin(), periods.end());
    }
}

}  // namespace

LoadedPanel panel_from_table(const CsvTable& table, const PanelSpec& spec, const std::string& origin) {
    if (spec.pre_periods < 1) throw ValidationError("panel: pre_periods must be >= 1");
    if (spec.post_periods < 0) throw ValidationError("panel: post_periods must be >= 0");
    if (spec.target.empty()) throw ValidationError("panel: target unit not specified");

    std::vector<std::string> units;
    std::map<std::string, std::map<std::string, double>> cells;
    std::vector<std::string> periods;
    auto add = [&](const std::string& unit, const std::string& period, double v, std::size_t row) {
        if (!cells.count(unit)) units.push_back(unit);
        auto& by_period = cells[unit];
        if (by_period.count(period)) {
            throw ValidationError(origin + " row " + std::to_string(row) + ": duplicate entry for unit '" + unit +
                                  "', period '" + period + "'");
        }
        by_period[period] = v;
        if (std::find(periods.begin(), periods.end(), period) == periods.end()) periods.push_back(period);
    };

    if (spec.format == PanelFormat::Long) {
        const Index cu = table.column("unit");
        const Index cp = table.column("period");
        const Index cv = table.column("value");
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const auto& row = table.rows[r];
            add(row[static_cast<std::size_t>(cu)], row[static_cast<std::size_t>(cp)],
                parse_double(row[static_cast<std::size_t>(cv)], origin + " row " + std::to_string(r + 1)), r + 1);
        }
    } else {
        if (table.header.size() < 2) throw ValidationError(origin + ": wide panel needs a unit column and periods");
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            for (std::size_t c = 1; c < table.header.size(); ++c) {
                add(table.rows[r][0], table.header[c],
                    parse_double(table.rows[r][c], origin + " row " + std::to_string(r + 1) + " column '" +
                                                        table.header[c] + "'"),
                    r + 1);
            }
        }
    }
    sort_periods(periods);
    for (const auto& u : units) {
        for (const auto& p : periods) {
            if (!cells[u].count(p)) {
                throw ValidationError(origin + ": missing value for unit '" + u + "', period '" + p + "'");
            }
        }
    }

    std::size_t start = 0;
    if (spec.start_period) {
        const auto it = std::find(periods.begin(), periods.end(), *spec.start_period);
        if (it == periods.end()) throw ValidationError(origin + ": start period '" + *spec.start_period + "' not found");
        start = static_cast<std::size_t>(it - periods.begin());
    }
    const auto needed = static_cast<std::size_t>(spec.pre_periods + spec.post_periods);
    if (start + needed > periods.size()) {
        throw ValidationError(origin + ": need " + std::to_string(needed) + " periods from the start period but only " +
                              std::to_string(periods.size() - start) + " are available");
    }

    if (!cells.count(spec.target)) throw ValidationError(origin + ": target unit '" + spec.target + "' not found");
    std::vector<std::string> donors;
    if (spec.donor_pool.empty()) {
        for (const auto& u : units) {
            if (u != spec.target) donors.push_back(u);
        }
    } else {
        for (const auto& u : spec.donor_pool) {
            if (!cells.count(u)) throw ValidationError(origin + ": donor unit '" + u + "' not found");
            if (u == spec.target) throw ValidationError("panel: the target unit cannot be a donor");
            if (std::find(donors.begin(), donors.end(), u) != donors.end()) {
                throw ValidationError("panel: donor '" + u + "' listed twice");
            }
            donors.push_back(u);
        }
    }
    if (donors.empty()) throw ValidationError(origin + ": no donor units");

    LoadedPanel out;
    out.periods.assign(periods.begin() + static_cast<std::ptrdiff_t>(start),
                       periods.begin() + static_cast<std::ptrdiff_t>(start + needed));
    std::vector<std::string> names{spec.target};
    names.insert(names.end(), donors.begin(), donors.end());
    Matrix y(static_cast<Index>(names.size()), static_cast<Index>(needed));
    for (std::size_t u = 0; u < names.size(); ++u) {
        for (std::size_t p = 0; p < needed; ++p) y(static_cast<Index>(u), static_cast<Index>(p)) = cells[names[u]][out.periods[p]];
    }
    out.panel = Panel(std::move(y), spec.pre_periods, spec.post_periods, std::move(names));
    return out;
}

LoadedPanel read_panel(const fs::path& path, const PanelSpec& spec) {
    return panel_from_table(read_csv(path), spec, path.string());
}

}  // namespace descent
