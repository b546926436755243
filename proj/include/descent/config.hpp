#pragma once

// Run configuration documents (JSON). Every key is checked: unknown keys fail
// with their full path, and every seed must be given explicitly. Relative
// paths resolve against the directory of the config file.

#include "descent/csv.hpp"
#include "descent/experiments.hpp"
#include "descent/feature_pipeline.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace descent {

// Command-line overrides applied on top of a config document.
struct Overrides {
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<bool> chart;
};

// Either an explicit list, a {from, to, step} range, or "all" (1..max).
struct GridSpec {
    std::vector<Index> values;
    Index from = 1;
    std::optional<Index> to;
    Index step = 1;
    bool explicit_values = false;

    std::vector<Index> resolve(Index max_value) const;
};

struct ExpandConfig {
    std::filesystem::path input;
    std::optional<std::filesystem::path> eval_input;
    std::string outcome;
    std::vector<ColumnSpec> columns;
    ExpansionPlan plan;
    std::filesystem::path out_dir;
    std::string train_name = "train_expanded.csv";
    std::string eval_name = "eval_expanded.csv";
    std::string columns_name = "columns.csv";
};

struct OlsCurveConfig {
    std::filesystem::path train;
    std::filesystem::path eval;
    std::string outcome;
    OrderingPlan orderings;
    std::optional<bool> pin_intercept;  // default: pin when column 0 is named "intercept"
    std::vector<EvalPlan> evals;
    GridSpec grid;
    double rank_tol = 1e-10;
    std::filesystem::path out_dir;
    std::string prefix = "ols_curve";
    bool chart = false;
};

struct ScCurveConfig {
    std::filesystem::path panel;
    PanelSpec panel_spec;
    GridSpec grid;
    std::uint64_t cap = 10000;
    std::uint64_t seed = 0;
    SolverSettings solver;
    std::filesystem::path out_dir;
    std::string prefix = "sc_curve";
    bool chart = false;
};

struct VerifyConfig {
    std::uint64_t seed = 0;
    int averaging_instances = 1000;
    int variance_instances = 1000;
    int monte_carlo_draws = 100000;
    int variation_instances = 1000;
    int sc_instances = 500;
    int permutation_instances = 200;
    std::string generator = "gaussian";  // gaussian | rank_deficient
    double rank_tol = 1e-10;
    SolverSettings solver;
    std::filesystem::path out_dir;
    std::string report_name = "verify_report.json";
};

ExpandConfig parse_expand_config(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                 const Overrides& ov = {});
OlsCurveConfig parse_ols_config(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                const Overrides& ov = {});
ScCurveConfig parse_sc_config(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                              const Overrides& ov = {});
VerifyConfig parse_verify_config(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                 const Overrides& ov = {});

nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace descent
