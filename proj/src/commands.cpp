#include "descent/commands.hpp"

#include "descent/chart.hpp"
#include "descent/csv.hpp"
#include "descent/errors.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <ostream>

namespace descent {

namespace fs = std::filesystem;

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

// Raw input split into the outcome column and everything else.
struct RawInput {
    Matrix x;
    std::vector<std::string> names;
    Vector y;
};

RawInput read_raw(const fs::path& path, const std::string& outcome) {
    const NumericTable t = to_numeric(read_csv(path), path.string());
    const auto it = std::find(t.names.begin(), t.names.end(), outcome);
    if (it == t.names.end()) throw ValidationError(path.string() + ": outcome column '" + outcome + "' not found");
    const Index yc = static_cast<Index>(it - t.names.begin());
    RawInput r;
    r.y = t.values.col(yc);
    r.x.resize(t.values.rows(), t.values.cols() - 1);
    for (Index c = 0, o = 0; c < t.values.cols(); ++c) {
        if (c == yc) continue;
        r.x.col(o++) = t.values.col(c);
        r.names.push_back(t.names[static_cast<std::size_t>(c)]);
    }
    return r;
}

}  // namespace

CommandOutput cmd_expand_features(const ExpandConfig& config) {
    const RawInput train = read_raw(config.input, config.outcome);
    const FeatureExpansion fx = FeatureExpansion::fit(train.x, train.names, config.columns, config.plan);

    CommandOutput out;
    out.warnings = fx.warnings();
    const auto names = fx.names();
    const fs::path train_path = config.out_dir / config.train_name;
    write_tabular(train_path, RegressionDataset(fx.transform_full(train.x, 0), train.y, names), config.outcome);
    out.files.push_back(train_path);

    if (config.eval_input) {
        const RawInput eval = read_raw(*config.eval_input, config.outcome);
        if (eval.names != train.names) {
            throw ValidationError(config.eval_input->string() + ": columns differ from the training input");
        }
        const fs::path eval_path = config.out_dir / config.eval_name;
        write_tabular(eval_path, RegressionDataset(fx.transform_full(eval.x, 1), eval.y, names), config.outcome);
        out.files.push_back(eval_path);
    }

    CsvTable sidecar;
    sidecar.header = {"column", "name", "kind", "sources", "detail"};
    const auto info = fx.provenance();
    for (std::size_t i = 0; i < info.size(); ++i) {
        sidecar.rows.push_back({std::to_string(i), info[i].name, info[i].kind, info[i].sources, info[i].detail});
    }
    const fs::path side_path = config.out_dir / config.columns_name;
    write_csv(side_path, sidecar);
    out.files.push_back(side_path);
    return out;
}

CsvTable ols_curve_table(const DescentCurve& curve) {
    CsvTable t;
    t.header = {"complexity", "in_rmse", "out_rmse", "coef_norm", "n_orderings"};
    for (const auto& r : curve.rows) {
        t.rows.push_back({std::to_string(r.complexity), format_double(r.in_rmse), cell(r.out_rmse), cell(r.coef_norm),
                          std::to_string(r.n_models)});
    }
    return t;
}

CsvTable ols_ordering_table(const std::vector<DescentCurve>& per_ordering) {
    CsvTable t;
    t.header = {"ordering", "complexity", "in_rmse", "out_rmse", "coef_norm"};
    for (std::size_t o = 0; o < per_ordering.size(); ++o) {
        for (const auto& r : per_ordering[o].rows) {
            t.rows.push_back({std::to_string(o), std::to_string(r.complexity), format_double(r.in_rmse),
                              cell(r.out_rmse), cell(r.coef_norm)});
        }
    }
    return t;
}

CsvTable sc_curve_table(const DescentCurve& curve) {
    CsvTable t;
    t.header = {"complexity", "train_rmse", "out_rmse", "n_subsets"};
    for (const auto& r : curve.rows) {
        t.rows.push_back({std::to_string(r.complexity), format_double(r.in_rmse), cell(r.out_rmse),
                          std::to_string(r.n_models)});
    }
    return t;
}

CommandOutput cmd_ols_curve(const OlsCurveConfig& config, Execution exec) {
    const RegressionDataset train = read_tabular(config.train, config.outcome);
    const RegressionDataset eval = read_tabular(config.eval, config.outcome);
    if (train.column_names != eval.column_names) {
        throw ValidationError(config.eval.string() + ": columns differ from " + config.train.string());
    }
    for (const EvalPlan& p : config.evals) {
        if (p.m > eval.n()) {
            throw ValidationError("eval plan m = " + std::to_string(p.m) + " exceeds the " + std::to_string(eval.n()) +
                                  " evaluation rows");
        }
    }
    OrderingPlan orderings = config.orderings;
    orderings.pin_first = config.pin_intercept.value_or(!train.column_names.empty() &&
                                                        train.column_names.front() == "intercept");
    const std::vector<Index> grid = config.grid.resolve(train.k());
    const OlsCurveResult result =
        ols_descent_curve(train, eval, orderings, config.evals, grid, RankTolerance(config.rank_tol), exec);

    CommandOutput out;
    for (std::size_t e = 0; e < result.evals.size(); ++e) {
        const std::string stem = config.prefix + "_m" + std::to_string(result.evals[e].m);
        const fs::path curve_path = config.out_dir / (stem + ".csv");
        write_csv(curve_path, ols_curve_table(result.averaged[e]));
        out.files.push_back(curve_path);
        const fs::path ord_path = config.out_dir / (stem + "_orderings.csv");
        write_csv(ord_path, ols_ordering_table(result.per_ordering[e]));
        out.files.push_back(ord_path);
        if (config.chart) {
            const fs::path svg = config.out_dir / (stem + ".svg");
            write_file_atomic(svg, render_svg(curve_chart(result.averaged[e],
                                                          "Least squares, m = " + std::to_string(result.evals[e].m),
                                                          "in-sample", static_cast<double>(train.n()))));
            out.files.push_back(svg);
        }
    }
    return out;
}

CommandOutput cmd_sc_curve(const ScCurveConfig& config, Execution exec) {
    const LoadedPanel loaded = read_panel(config.panel, config.panel_spec);
    const Panel& panel = loaded.panel;
    const std::vector<Index> grid = config.grid.resolve(panel.donors());
    const ScCurveResult result =
        sc_descent_curve(panel, DonorSubset::all(panel.donors()), grid, config.cap, config.seed, config.solver, exec);

    CommandOutput out;
    out.warnings = result.warnings;
    const fs::path path = config.out_dir / (config.prefix + ".csv");
    write_csv(path, sc_curve_table(result.curve));
    out.files.push_back(path);
    if (config.chart) {
        const fs::path svg = config.out_dir / (config.prefix + ".svg");
        write_file_atomic(svg, render_svg(curve_chart(result.curve, "Synthetic control", "training", std::nullopt)));
        out.files.push_back(svg);
    }
    return out;
}

VerifyOutput cmd_verify(const VerifyConfig& config) {
    VerifyOutput v;
    v.report = run_verify(config);
    const fs::path path = config.out_dir / config.report_name;
    write_file_atomic(path, v.report.to_json().dump(2) + "\n");
    v.output.files.push_back(path);
    return v;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Minimum-norm regression and synthetic control: descent curves and invariant checks", "descent"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    bool chart = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides the config)");
        sub->add_option("--seed-override", seed, "Replace every seed in the config");
        sub->add_option("--threads", threads, "OpenMP threads for sweeps")->check(CLI::PositiveNumber);
        sub->add_flag("--chart,!--no-chart", chart, "Write SVG charts next to the CSVs");
    };
    CLI::App* expand = app.add_subcommand("expand-features", "Expand raw columns into indicator features");
    CLI::App* ols = app.add_subcommand("ols-curve", "Risk versus number of regressors");
    CLI::App* sc = app.add_subcommand("sc-curve", "Risk versus number of donor units");
    CLI::App* verify = app.add_subcommand("verify", "Run the invariant suites on random instances");
    for (CLI::App* sub : {expand, ols, sc, verify}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    Overrides ov;
    if (sub->count("--out")) ov.out_dir = fs::path(out_dir);
    if (sub->count("--seed-override")) ov.seed = seed;
    if (sub->count("--chart") || sub->count("--no-chart")) ov.chart = chart;
    if (threads > 0) omp_set_num_threads(threads);

    try {
        const fs::path cfg(config_path);
        const nlohmann::json doc = load_json(cfg);
        const fs::path base = cfg.parent_path();
        CommandOutput result;
        int code = 0;
        if (sub == expand) {
            result = cmd_expand_features(parse_expand_config(doc, base, ov));
        } else if (sub == ols) {
            result = cmd_ols_curve(parse_ols_config(doc, base, ov));
        } else if (sub == sc) {
            result = cmd_sc_curve(parse_sc_config(doc, base, ov));
        } else {
            VerifyOutput v = cmd_verify(parse_verify_config(doc, base, ov));
            out << v.report.to_text();
            result = std::move(v.output);
            if (!v.report.pass()) code = static_cast<int>(ErrorKind::Numerical);
        }
        for (const auto& w : result.warnings) err << "warning: " << w << "\n";
        for (const auto& f : result.files) out << "wrote " << f.string() << "\n";
        return code;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::Numerical);
    }
}

}  // namespace descent
