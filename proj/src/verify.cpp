#include "descent/verify.hpp"

#include "descent/errors.hpp"
#include "descent/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace descent {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxFailures = 10;

enum SuiteId : std::uint64_t { kAveraging = 1, kVariance, kVariation, kScDecomp, kPermutation };

std::mt19937_64 instance_rng(const SuiteOptions& opt, SuiteId suite, int i) {
    return make_rng(opt.seed, RngPurpose::Verify, (static_cast<std::uint64_t>(suite) << 40) + static_cast<std::uint64_t>(i));
}

Matrix gaussian(std::mt19937_64& rng, Index rows, Index cols) {
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = z(rng);
    return m;
}

Vector gaussian(std::mt19937_64& rng, Index len) { return gaussian(rng, len, 1).col(0); }

// Duplicate the first row into the last (or zero a single row) so X X' is singular.
void break_row_rank(Matrix& x) {
    if (x.rows() >= 2) {
        x.row(x.rows() - 1) = x.row(0);
    } else {
        x.setZero();
    }
}

void break_column_rank(Matrix& x) {
    if (x.cols() >= 2) {
        x.col(1) = x.col(0);
    } else {
        x.setZero();
    }
}

class Tracker {
public:
    Tracker(std::string name, int instances) : start_(std::chrono::steady_clock::now()) {
        r_.name = std::move(name);
        r_.instances = instances;
    }

    void max_metric(const std::string& key, double v) {
        auto [it, fresh] = r_.metrics.emplace(key, v);
        if (!fresh) it->second = std::max(it->second, v);
    }
    void min_metric(const std::string& key, double v) {
        auto [it, fresh] = r_.metrics.emplace(key, v);
        if (!fresh) it->second = std::min(it->second, v);
    }
    void count(const std::string& key, double by = 1.0) { r_.metrics[key] += by; }

    void violation(const std::string& what) {
        ++r_.violations;
        if (r_.failures.size() < kMaxFailures) r_.failures.push_back(what);
    }
    void checked() { ++r_.checked; }
    void rank_error() { ++r_.rank_errors; }

    // Runs one instance, sorting exceptions into rank errors and violations.
    template <typename F>
    void run(int i, F&& body) {
        try {
            body();
        } catch (const RankError&) {
            rank_error();
        } catch (const Error& e) {
            violation("instance " + std::to_string(i) + ": " + e.what());
        }
    }

    SuiteReport finish() {
        r_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        return std::move(r_);
    }

private:
    SuiteReport r_;
    std::chrono::steady_clock::time_point start_;
};

// Sum and range error of lambda relative to the simplex.
double simplex_violation(const std::vector<double>& w) {
    double sum = 0.0, worst = 0.0;
    for (double v : w) {
        sum += v;
        worst = std::max({worst, -v, v - 1.0});
    }
    return std::max(worst, std::abs(sum - 1.0));
}

void portfolio_point(Tracker& t, int i, double y, const Vector& simple, double complex_pred,
                     const AveragingWeights& lambda, double ma_tol) {
    const JensenCheck c = jensen_bound_check(y, simple, complex_pred, lambda, ma_tol);
    t.min_metric("min_portfolio_slack", c.slack);
    t.count("portfolio_points");
    if (!c.pass) t.violation("instance " + std::to_string(i) + ": portfolio bound slack " + std::to_string(c.slack));
}

}  // namespace

Generator parse_generator(const std::string& name) {
    if (name == "gaussian") return Generator::Gaussian;
    if (name == "rank_deficient") return Generator::RankDeficient;
    throw ValidationError("unknown generator '" + name + "'");
}

SuiteReport verify_model_averaging(const SuiteOptions& opt) {
    Tracker t("model_averaging", opt.instances);
    for (int i = 0; i < opt.instances; ++i) {
        t.run(i, [&] {
            auto rng = instance_rng(opt, kAveraging, i);
            const Index n = 1 + i % 5;
            const Index p = n + 1 + (i / 5) % 6;
            Matrix x = gaussian(rng, n, p);
            if (opt.generator == Generator::RankDeficient) break_row_rank(x);
            const RegressionDataset data(x, gaussian(rng, n));
            std::vector<Index> all(static_cast<std::size_t>(p));
            std::iota(all.begin(), all.end(), Index{0});
            const FeatureSubset subset(all, p);

            const AveragingDecomposition d = averaging_decomposition(data, subset, opt.tol);
            t.checked();
            const double bound = 1e-8 * (1.0 + d.full.norm);
            t.max_metric("max_residual", d.residual);
            t.max_metric("max_scaled_residual", d.residual / (1.0 + d.full.norm));
            if (d.residual > bound) {
                t.violation("instance " + std::to_string(i) + ": identity residual " + std::to_string(d.residual));
            }
            const double sv = simplex_violation(d.lambda.weights);
            t.max_metric("max_lambda_simplex_violation", sv);
            if (sv > 1e-10) t.violation("instance " + std::to_string(i) + ": weights leave the simplex");

            const auto fast = leave_one_out_fits(data, subset, opt.tol, LooMethod::ShermanMorrison);
            double gap = 0.0;
            for (std::size_t j = 0; j < fast.size(); ++j) {
                gap = std::max(gap, (fast[j].beta - d.loo[j].beta).norm() / (1.0 + d.loo[j].norm));
            }
            t.max_metric("max_rank_one_update_gap", gap);
            if (gap > 1e-8) t.violation("instance " + std::to_string(i) + ": rank-one update disagrees with refit");

            for (int e = 0; e < 5; ++e) {
                const Vector xe = gaussian(rng, p);
                const double ye = std::normal_distribution<double>(0.0, 1.0)(rng);
                Vector simple(p);
                for (Index j = 0; j < p; ++j) simple(j) = xe.dot(d.loo[static_cast<std::size_t>(j)].beta);
                portfolio_point(t, i, ye, simple, xe.dot(d.full.beta), d.lambda, 1e-6);
            }
        });
    }
    return t.finish();
}

SuiteReport verify_variance_reduction(const SuiteOptions& opt, int mc_draws) {
    Tracker t("variance_reduction", opt.instances);
    for (int i = 0; i < opt.instances; ++i) {
        t.run(i, [&] {
            auto rng = instance_rng(opt, kVariance, i);
            const Index n = 1 + i % 5;
            const Index p = n + 1 + (i / 5) % 6;
            Matrix x = gaussian(rng, n, p);
            if (opt.generator == Generator::RankDeficient) break_row_rank(x);
            std::vector<Index> all(static_cast<std::size_t>(p));
            std::iota(all.begin(), all.end(), Index{0});
            const FeatureSubset subset(all, p);
            const double full = trace_variance_interpolating(x, subset, 1.0, opt.tol);
            double best = kInf;
            for (Index j = 0; j < p; ++j) {
                const FeatureSubset sub = subset.without(j);
                best = std::min(best, inverse_gram_trace(select_columns(x, sub.indices()), opt.tol));
            }
            t.checked();
            t.min_metric("min_slack", best - full);
            t.min_metric("min_relative_slack", (best - full) / best);
            if (full > best + 1e-9) {
                t.violation("instance " + std::to_string(i) + ": trace exceeds a submodel by " + std::to_string(full - best));
            }
        });
    }
    if (mc_draws > 0) {
        t.run(-1, [&] {
            auto rng = instance_rng(opt, kVariance, 0x7fffffff);
            Matrix x = gaussian(rng, 3, 6);
            if (opt.generator == Generator::RankDeficient) break_row_rank(x);
            const FeatureSubset subset({0, 1, 2, 3, 4, 5}, 6);
            const Vector beta = gaussian(rng, 6);
            const double exact = trace_variance_interpolating(x, subset, 1.0, opt.tol);
            const double mc = monte_carlo_trace_variance(x, subset, beta, 1.0, mc_draws, opt.seed, opt.tol);
            const double rel = std::abs(mc - exact) / exact;
            t.max_metric("monte_carlo_relative_error", rel);
            if (rel > 0.02) t.violation("monte carlo trace variance off by " + std::to_string(rel * 100) + "%");
        });
    }
    return t.finish();
}

SuiteReport verify_variation_hierarchy(const SuiteOptions& opt) {
    Tracker t("variation_hierarchy", 2 * opt.instances);
    for (int i = 0; i < opt.instances; ++i) {
        // |J| <= n: design-weighted distance can only grow with J.
        t.run(i, [&] {
            auto rng = instance_rng(opt, kVariation, 2 * i);
            const Index n = 2 + i % 7;
            const Index p = 2 + (i / 7) % (n - 1);
            Matrix x = gaussian(rng, n, p);
            if (opt.generator == Generator::RankDeficient) break_column_rank(x);
            const RegressionDataset a(x, gaussian(rng, n));
            const RegressionDataset b(x, gaussian(rng, n));
            std::vector<Index> all(static_cast<std::size_t>(p));
            std::iota(all.begin(), all.end(), Index{0});
            const FeatureSubset subset(all, p);
            const double full =
                variation_distance(fit_subset(a, subset, opt.tol), fit_subset(b, subset, opt.tol), DesignWeighted{&x});
            double worst = 0.0;
            for (Index j = 0; j < p; ++j) {
                const FeatureSubset sub = subset.without(j);
                worst = std::max(worst, variation_distance(fit_subset(a, sub, opt.tol), fit_subset(b, sub, opt.tol),
                                                           DesignWeighted{&x}));
            }
            t.checked();
            t.count("design_weighted_pairs");
            t.min_metric("min_design_weighted_slack", full - worst);
            if (full < worst - 1e-9) t.violation("instance " + std::to_string(i) + ": design-weighted branch");
        });
        // |J| > n: Euclidean distance can only shrink with J.
        t.run(i, [&] {
            auto rng = instance_rng(opt, kVariation, 2 * i + 1);
            const Index n = 1 + i % 5;
            const Index p = n + 1 + (i / 5) % 6;
            Matrix x = gaussian(rng, n, p);
            if (opt.generator == Generator::RankDeficient) break_row_rank(x);
            const RegressionDataset a(x, gaussian(rng, n));
            const RegressionDataset b(x, gaussian(rng, n));
            std::vector<Index> all(static_cast<std::size_t>(p));
            std::iota(all.begin(), all.end(), Index{0});
            const FeatureSubset subset(all, p);
            const double full =
                variation_distance(fit_subset(a, subset, opt.tol), fit_subset(b, subset, opt.tol), Euclidean{});
            double best = kInf;
            for (Index j = 0; j < p; ++j) {
                const FeatureSubset sub = subset.without(j);
                best = std::min(best, variation_distance(fit_subset(a, sub, opt.tol), fit_subset(b, sub, opt.tol),
                                                         Euclidean{}));
            }
            t.checked();
            t.count("euclidean_pairs");
            t.min_metric("min_euclidean_slack", best - full);
            if (full > best + 1e-9) t.violation("instance " + std::to_string(i) + ": euclidean branch");
        });
    }
    return t.finish();
}

SuiteReport verify_sc_decomposition(const SuiteOptions& opt) {
    Tracker t("sc_decomposition", opt.instances);
    for (int i = 0; i < opt.instances; ++i) {
        t.run(i, [&] {
            auto rng = instance_rng(opt, kScDecomp, i);
            const Index m = 2 + i % 5;
            const Index periods = 1 + (i / 5) % 4;
            Matrix pre = gaussian(rng, periods, m);
            const bool duplicated = opt.generator == Generator::RankDeficient || i % 4 == 3;
            if (duplicated) pre.col(1) = pre.col(0);
            const Vector target = gaussian(rng, periods);

            const ScAveraging avg = sc_model_averaging(pre, target, 1e-6, opt.solver);
            t.checked();
            if (duplicated) t.count("duplicate_donor_instances");
            t.max_metric("max_residual", avg.decomposition.residual);
            const double sv = simplex_violation(avg.decomposition.lambda.weights);
            t.max_metric("max_lambda_simplex_violation", sv);
            if (sv > 1e-9) t.violation("instance " + std::to_string(i) + ": decomposition weights leave the simplex");

            Matrix post = gaussian(rng, 3, m);
            if (duplicated) post.col(1) = post.col(0);
            const Vector post_target = gaussian(rng, 3);
            Vector simple(m);
            const double ma_tol = std::max(1e-8, 10.0 * avg.decomposition.residual * post.cwiseAbs().maxCoeff());
            for (Index s = 0; s < 3; ++s) {
                for (Index j = 0; j < m; ++j) simple(j) = post.row(s).dot(avg.loo[static_cast<std::size_t>(j)]);
                portfolio_point(t, i, post_target(s), simple, post.row(s).dot(avg.full), avg.decomposition.lambda, ma_tol);
            }
        });
    }
    return t.finish();
}

SuiteReport verify_permutation_implication(const SuiteOptions& opt) {
    Tracker t("permutation_implication", opt.instances);
    constexpr Index kEval = 25;
    for (int i = 0; i < opt.instances; ++i) {
        t.run(i, [&] {
            auto rng = instance_rng(opt, kPermutation, i);
            ModelAverage model;
            Vector truths;
            if (i % 2 == 0) {
                const Index n = 1 + (i / 2) % 3;
                const Index p = n + 1 + (i / 6) % (5 - n);
                Matrix x = gaussian(rng, n, p);
                if (opt.generator == Generator::RankDeficient) break_row_rank(x);
                const Vector beta = gaussian(rng, p);
                const Vector noise = gaussian(rng, n);
                const RegressionDataset data(x, x * beta + 0.5 * noise);
                std::vector<Index> all(static_cast<std::size_t>(p));
                std::iota(all.begin(), all.end(), Index{0});
                const FeatureSubset subset(all, p);
                const AveragingWeights lambda = averaging_weights(data, subset, opt.tol);
                const auto loo = leave_one_out_fits(data, subset, opt.tol);
                const Matrix xe = gaussian(rng, kEval, p);
                truths = xe * beta + 0.5 * gaussian(rng, kEval);
                model.lambda = lambda;
                model.simple_predictions.resize(kEval, p);
                for (Index j = 0; j < p; ++j) model.simple_predictions.col(j) = xe * loo[static_cast<std::size_t>(j)].beta;
            } else {
                const Index m = 2 + (i / 2) % 4;
                const Index periods = 1 + (i / 8) % 3;
                Matrix pre = gaussian(rng, periods, m);
                if (opt.generator == Generator::RankDeficient) pre.col(1) = pre.col(0);
                const ScAveraging avg = sc_model_averaging(pre, gaussian(rng, periods), 1e-6, opt.solver);
                const Matrix post = gaussian(rng, kEval, m);
                truths = gaussian(rng, kEval);
                model.lambda = avg.decomposition.lambda;
                model.simple_predictions.resize(kEval, m);
                for (Index j = 0; j < m; ++j) model.simple_predictions.col(j) = post * avg.loo[static_cast<std::size_t>(j)];
            }
            const PermutationReport r = permutation_audit(model, truths, PermutationSpec::exhaustive());
            t.checked();
            if (r.premise_mean) {
                t.count("premise_held");
                t.min_metric("min_conclusion_slack_given_premise", r.conclusion_slack);
                if (r.conclusion_slack < -1e-12) {
                    t.violation("instance " + std::to_string(i) + ": premise held but conclusion failed by " +
                                std::to_string(-r.conclusion_slack));
                }
            }
            if (r.conclusion) t.count("conclusion_held");
            // Averaging over every permutation never exceeds the simple-model mean.
            t.min_metric("min_permuted_mean_gap", r.mean_simple - r.mean_permuted);
        });
    }
    return t.finish();
}

bool VerifyReport::pass() const {
    return std::all_of(suites.begin(), suites.end(), [](const SuiteReport& s) { return s.pass(); });
}

nlohmann::json VerifyReport::to_json() const {
    nlohmann::json doc;
    doc["pass"] = pass();
    doc["suites"] = nlohmann::json::array();
    for (const auto& s : suites) {
        nlohmann::json js{{"name", s.name},         {"instances", s.instances},     {"checked", s.checked},
                          {"rank_errors", s.rank_errors}, {"violations", s.violations}, {"pass", s.pass()},
                          {"seconds", s.seconds}};
        js["metrics"] = nlohmann::json::object();
        for (const auto& [k, v] : s.metrics) js["metrics"][k] = v;
        js["failures"] = s.failures;
        doc["suites"].push_back(std::move(js));
    }
    return doc;
}

std::string VerifyReport::to_text() const {
    std::ostringstream os;
    for (const auto& s : suites) {
        os << (s.pass() ? "PASS " : "FAIL ") << s.name << ": " << s.checked << "/" << s.instances << " checked, "
           << s.rank_errors << " rank errors, " << s.violations << " violations (" << s.seconds << " s)\n";
        for (const auto& [k, v] : s.metrics) os << "    " << k << " = " << v << "\n";
        for (const auto& f : s.failures) os << "    ! " << f << "\n";
    }
    os << (pass() ? "all suites passed" : "some suites failed") << "\n";
    return os.str();
}

VerifyReport run_verify(const VerifyConfig& config) {
    SuiteOptions base;
    base.seed = config.seed;
    base.generator = parse_generator(config.generator);
    base.tol = RankTolerance(config.rank_tol);
    base.solver = config.solver;

    auto with = [&](int n) {
        SuiteOptions o = base;
        o.instances = n;
        return o;
    };
    VerifyReport r;
    r.suites.push_back(verify_model_averaging(with(config.averaging_instances)));
    r.suites.push_back(verify_variance_reduction(with(config.variance_instances), config.monte_carlo_draws));
    r.suites.push_back(verify_variation_hierarchy(with(config.variation_instances)));
    r.suites.push_back(verify_sc_decomposition(with(config.sc_instances)));
    r.suites.push_back(verify_permutation_implication(with(config.permutation_instances)));
    return r;
}

}  // namespace descent
