#pragma once

// CSV ingestion and emission. Floats are written with 17 significant digits so
// that reading a written file reproduces every value; all writes go through a
// temporary file and a rename.

#include "descent/interp_ols.hpp"
#include "descent/synth_control.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace descent {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    Index column(const std::string& name) const;  // throws naming the column
};

CsvTable parse_csv(const std::string& text, const std::string& origin = "<memory>");
CsvTable read_csv(const std::filesystem::path& path);
std::string format_csv(const CsvTable& table);

// Writes content to path via a sibling temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

std::string format_double(double x);  // 17 significant digits, shortest round-trip form
double parse_double(const std::string& cell, const std::string& context);

struct NumericTable {
    std::vector<std::string> names;
    Matrix values;  // rows x names
};

NumericTable to_numeric(const CsvTable& table, const std::string& origin);
CsvTable from_numeric(const NumericTable& table);

// Tabular file with one designated outcome column; every other column is a covariate.
RegressionDataset read_tabular(const std::filesystem::path& path, const std::string& outcome);
void write_tabular(const std::filesystem::path& path, const RegressionDataset& data, const std::string& outcome);

enum class PanelFormat { Long, Wide };

struct PanelSpec {
    PanelFormat format = PanelFormat::Long;
    std::string target;
    Index pre_periods = 0;
    Index post_periods = 0;
    std::optional<std::string> start_period;     // first pre-period; defaults to the earliest
    std::vector<std::string> donor_pool;         // empty: every non-target unit
};

struct LoadedPanel {
    Panel panel;
    std::vector<std::string> periods;  // the T + S periods used, in order
};

// Long format: columns unit, period, value. Wide format: a unit column followed
// by one column per period. Periods sort numerically when all are numeric.
LoadedPanel read_panel(const std::filesystem::path& path, const PanelSpec& spec);
LoadedPanel panel_from_table(const CsvTable& table, const PanelSpec& spec, const std::string& origin);

}  // namespace descent
