#include "descent/config.hpp"

#include "descent/errors.hpp"

#include <fstream>
#include <set>

namespace descent {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<Index> GridSpec::resolve(Index max_value) const {
    if (explicit_values) return values;
    const Index last = to.value_or(max_value);
    if (from < 1 || step < 1 || last < from) {
        throw ValidationError("grid: need 1 <= from <= to and step >= 1");
    }
    std::vector<Index> out;
    for (Index l = from; l <= last; l += step) out.push_back(l);
    if (out.back() != last) out.push_back(last);
    return out;
}

namespace {

// A JSON object whose keys are consumed as they are read; finish() rejects leftovers.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ValidationError("config " + path_ + ": expected an object");
    }
    Section(const Section&) = delete;

    bool has(const std::string& key) const { return node_.contains(key); }

    template <typename T>
    T get(const std::string& key) {
        if (!node_.contains(key)) throw ValidationError("config " + path_ + "." + key + ": required key missing");
        return convert<T>(key);
    }

    template <typename T>
    std::optional<T> opt(const std::string& key) {
        if (!node_.contains(key)) return std::nullopt;
        return convert<T>(key);
    }

    template <typename T>
    T get_or(const std::string& key, T fallback) {
        return opt<T>(key).value_or(std::move(fallback));
    }

    const json& raw(const std::string& key) {
        if (!node_.contains(key)) throw ValidationError("config " + path_ + "." + key + ": required key missing");
        used_.insert(key);
        return node_.at(key);
    }

    std::string path(const std::string& key) const { return path_ + "." + key; }

    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            if (!used_.count(it.key())) throw ValidationError("config " + path_ + "." + it.key() + ": unknown key");
        }
    }

private:
    template <typename T>
    T convert(const std::string& key) {
        used_.insert(key);
        const json& v = node_.at(key);
        try {
            if constexpr (std::is_same_v<T, std::uint64_t> || std::is_same_v<T, Index> || std::is_same_v<T, int>) {
                if (!v.is_number_integer()) throw ValidationError("config " + path(key) + ": expected an integer");
                if constexpr (std::is_same_v<T, std::uint64_t>) {
                    if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0) throw ValidationError("config " + path(key) + ": expected a nonnegative integer");
                }
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ValidationError("config " + path(key) + ": expected a number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ValidationError("config " + path(key) + ": expected true or false");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ValidationError("config " + path(key) + ": expected a string");
            }
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ValidationError("config " + path(key) + ": " + e.what());
        }
    }

    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

GridSpec parse_grid(const json& v, const std::string& path) {
    GridSpec g;
    if (v.is_string()) {
        if (v.get<std::string>() != "all") throw ValidationError("config " + path + ": expected \"all\", a list or a range");
        return g;
    }
    if (v.is_array()) {
        g.explicit_values = true;
        for (const auto& e : v) {
            if (!e.is_number_integer()) throw ValidationError("config " + path + ": grid entries must be integers");
            g.values.push_back(e.get<Index>());
        }
        return g;
    }
    Section s(v, path);
    g.from = s.get_or<Index>("from", 1);
    g.to = s.opt<Index>("to");
    g.step = s.get_or<Index>("step", 1);
    s.finish();
    return g;
}

SolverSettings parse_solver(const json& v, const std::string& path) {
    SolverSettings out;
    Section s(v, path);
    out.opt_tol = s.get_or("opt_tol", out.opt_tol);
    out.max_iter = s.get_or("max_iter", out.max_iter);
    if (s.has("path")) {
        const json& p = s.raw("path");
        if (!p.is_array()) throw ValidationError("config " + s.path("path") + ": expected a list of penalties");
        out.path.clear();
        for (const auto& e : p) {
            if (!e.is_number()) throw ValidationError("config " + s.path("path") + ": penalties must be numbers");
            out.path.push_back(e.get<double>());
        }
    }
    out.path_tol = s.get_or("path_tol", out.path_tol);
    s.finish();
    try {
        out.validate();
    } catch (const ValidationError& e) {
        throw ValidationError("config " + path + ": " + e.what());
    }
    return out;
}

struct OutputBlock {
    fs::path dir;
    std::optional<std::string> prefix;
    std::optional<bool> chart;
};

fs::path output_dir(std::optional<std::string> dir, const fs::path& base, const Overrides& ov, const std::string& path) {
    if (ov.out_dir) return *ov.out_dir;
    if (!dir) throw ValidationError("config " + path + ".dir: required unless --out is given");
    return resolve(base, *dir);
}

}  // namespace

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

ExpandConfig parse_expand_config(const json& doc, const fs::path& base, const Overrides& ov) {
    ExpandConfig c;
    Section root(doc, "$");
    c.input = resolve(base, root.get<std::string>("input"));
    if (auto e = root.opt<std::string>("eval_input")) c.eval_input = resolve(base, *e);
    c.outcome = root.get<std::string>("outcome");

    const json& cols = root.raw("columns");
    if (!cols.is_array() || cols.empty()) throw ValidationError("config $.columns: expected a nonempty list");
    for (std::size_t i = 0; i < cols.size(); ++i) {
        Section s(cols[i], "$.columns[" + std::to_string(i) + "]");
        ColumnSpec spec;
        spec.name = s.get<std::string>("name");
        spec.kind = parse_column_kind(s.get<std::string>("kind"));
        spec.exclusion_group = s.opt<std::string>("exclusion_group");
        s.finish();
        if (spec.name == c.outcome) throw ValidationError("config " + s.path("name") + ": the outcome cannot be a feature");
        c.columns.push_back(std::move(spec));
    }

    Section ex(root.raw("expansion"), "$.expansion");
    c.plan.bins_per_continuous = ex.get_or("bins", c.plan.bins_per_continuous);
    c.plan.jitter_sd = ex.get_or("jitter_sd", c.plan.jitter_sd);
    c.plan.jitter_seed = ex.get<std::uint64_t>("jitter_seed");
    c.plan.interactions = ex.get_or("interactions", c.plan.interactions);
    c.plan.intercept = ex.get_or("intercept", c.plan.intercept);
    ex.finish();
    if (ov.seed) c.plan.jitter_seed = *ov.seed;
    c.plan.validate();

    Section out(root.raw("output"), "$.output");
    c.out_dir = output_dir(out.opt<std::string>("dir"), base, ov, "$.output");
    c.train_name = out.get_or("train_name", c.train_name);
    c.eval_name = out.get_or("eval_name", c.eval_name);
    c.columns_name = out.get_or("columns_name", c.columns_name);
    out.finish();
    root.finish();
    return c;
}

OlsCurveConfig parse_ols_config(const json& doc, const fs::path& base, const Overrides& ov) {
    OlsCurveConfig c;
    Section root(doc, "$");
    c.train = resolve(base, root.get<std::string>("train"));
    c.eval = resolve(base, root.get<std::string>("eval"));
    c.outcome = root.get<std::string>("outcome");

    Section ord(root.raw("orderings"), "$.orderings");
    c.orderings.count = ord.get_or("count", 5);
    c.orderings.seed = ord.get<std::uint64_t>("seed");
    c.pin_intercept = ord.opt<bool>("pin_intercept");
    ord.finish();
    if (c.orderings.count < 1) throw ValidationError("config $.orderings.count: must be >= 1");

    const json& plans = root.raw("eval_plans");
    if (!plans.is_array() || plans.empty()) throw ValidationError("config $.eval_plans: expected a nonempty list");
    for (std::size_t i = 0; i < plans.size(); ++i) {
        Section s(plans[i], "$.eval_plans[" + std::to_string(i) + "]");
        EvalPlan p;
        p.m = s.get<Index>("m");
        p.num_draws = s.get_or("draws", p.num_draws);
        if (p.m > 1) {
            p.seed = s.get<std::uint64_t>("seed");
        } else {
            p.seed = s.get_or<std::uint64_t>("seed", 0);
        }
        s.finish();
        try {
            p.validate();
        } catch (const ValidationError& e) {
            throw ValidationError("config " + s.path("m") + ": " + e.what());
        }
        if (ov.seed) p.seed = *ov.seed;
        c.evals.push_back(p);
    }
    if (ov.seed) c.orderings.seed = *ov.seed;

    c.grid = root.has("grid") ? parse_grid(root.raw("grid"), "$.grid") : GridSpec{};
    c.rank_tol = root.get_or("rank_tol", c.rank_tol);
    RankTolerance check(c.rank_tol);

    Section out(root.raw("output"), "$.output");
    c.out_dir = output_dir(out.opt<std::string>("dir"), base, ov, "$.output");
    c.prefix = out.get_or("prefix", c.prefix);
    c.chart = out.get_or("chart", false);
    out.finish();
    if (ov.chart) c.chart = *ov.chart;
    root.finish();
    return c;
}

ScCurveConfig parse_sc_config(const json& doc, const fs::path& base, const Overrides& ov) {
    ScCurveConfig c;
    Section root(doc, "$");
    c.panel = resolve(base, root.get<std::string>("panel"));
    const std::string format = root.get_or<std::string>("format", "long");
    if (format == "long") {
        c.panel_spec.format = PanelFormat::Long;
    } else if (format == "wide") {
        c.panel_spec.format = PanelFormat::Wide;
    } else {
        throw ValidationError("config $.format: expected \"long\" or \"wide\"");
    }
    c.panel_spec.target = root.get<std::string>("target");
    c.panel_spec.pre_periods = root.get<Index>("pre_periods");
    c.panel_spec.post_periods = root.get<Index>("post_periods");
    c.panel_spec.start_period = root.opt<std::string>("start_period");
    if (root.has("donor_pool")) {
        const json& pool = root.raw("donor_pool");
        if (!pool.is_array()) throw ValidationError("config $.donor_pool: expected a list of unit names");
        for (const auto& u : pool) {
            if (!u.is_string()) throw ValidationError("config $.donor_pool: unit names must be strings");
            c.panel_spec.donor_pool.push_back(u.get<std::string>());
        }
    }
    c.grid = root.has("grid") ? parse_grid(root.raw("grid"), "$.grid") : GridSpec{};
    c.cap = root.get_or<std::uint64_t>("cap", c.cap);
    if (c.cap < 1) throw ValidationError("config $.cap: must be >= 1");
    c.seed = root.get<std::uint64_t>("seed");
    if (ov.seed) c.seed = *ov.seed;
    if (root.has("solver")) c.solver = parse_solver(root.raw("solver"), "$.solver");

    Section out(root.raw("output"), "$.output");
    c.out_dir = output_dir(out.opt<std::string>("dir"), base, ov, "$.output");
    c.prefix = out.get_or("prefix", c.prefix);
    c.chart = out.get_or("chart", false);
    out.finish();
    if (ov.chart) c.chart = *ov.chart;
    root.finish();
    return c;
}

VerifyConfig parse_verify_config(const json& doc, const fs::path& base, const Overrides& ov) {
    VerifyConfig c;
    Section root(doc, "$");
    c.seed = root.get<std::uint64_t>("seed");
    if (ov.seed) c.seed = *ov.seed;
    if (root.has("instances")) {
        Section s(root.raw("instances"), "$.instances");
        c.averaging_instances = s.get_or("model_averaging", c.averaging_instances);
        c.variance_instances = s.get_or("variance_reduction", c.variance_instances);
        c.monte_carlo_draws = s.get_or("monte_carlo_draws", c.monte_carlo_draws);
        c.variation_instances = s.get_or("variation_hierarchy", c.variation_instances);
        c.sc_instances = s.get_or("sc_decomposition", c.sc_instances);
        c.permutation_instances = s.get_or("permutation_implication", c.permutation_instances);
        s.finish();
        for (int n : {c.averaging_instances, c.variance_instances, c.variation_instances, c.sc_instances, c.permutation_instances}) {
            if (n < 0) throw ValidationError("config $.instances: counts must be >= 0");
        }
        if (c.monte_carlo_draws != 0 && c.monte_carlo_draws < 2) {
            throw ValidationError("config $.instances.monte_carlo_draws: use 0 to skip or >= 2");
        }
    }
    c.generator = root.get_or<std::string>("generator", c.generator);
    if (c.generator != "gaussian" && c.generator != "rank_deficient") {
        throw ValidationError("config $.generator: expected \"gaussian\" or \"rank_deficient\"");
    }
    c.rank_tol = root.get_or("rank_tol", c.rank_tol);
    RankTolerance check(c.rank_tol);
    if (root.has("solver")) c.solver = parse_solver(root.raw("solver"), "$.solver");
    Section out(root.raw("output"), "$.output");
    c.out_dir = output_dir(out.opt<std::string>("dir"), base, ov, "$.output");
    c.report_name = out.get_or("report", c.report_name);
    out.finish();
    root.finish();
    return c;
}

}  // namespace descent
