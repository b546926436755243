#include "descent/experiments.hpp"

#include "descent/errors.hpp"
#include "descent/feature_pipeline.hpp"
#include "descent/rng.hpp"


#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

namespace descent {

void EvalPlan::validate() const {
    if (m < 1) throw ValidationError("eval plan: m must be >= 1");
    if (num_draws < 1) throw ValidationError("eval plan: num_draws must be >= 1");
}

EvalDraws::EvalDraws(Index eval_size, const EvalPlan& plan) : eval_size_(eval_size), plan_(plan) {
    plan.validate();
    if (plan.m > eval_size) {
        throw ValidationError("eval plan: m = " + std::to_string(plan.m) + " exceeds the evaluation set size " +
                              std::to_string(eval_size));
    }
    if (plan.m == 1) return;
    auto rng = make_rng(plan.seed, RngPurpose::EvalDraws);
    std::vector<Index> pool(static_cast<std::size_t>(eval_size));
    std::iota(pool.begin(), pool.end(), Index{0});
    draws_.reserve(static_cast<std::size_t>(plan.num_draws));
    for (int d = 0; d < plan.num_draws; ++d) {
        // Partial Fisher-Yates: the first m slots become a uniform m-subset.
        for (Index i = 0; i < plan.m; ++i) {
            std::uniform_int_distribution<Index> pick(i, eval_size - 1);
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
        }
        draws_.emplace_back(pool.begin(), pool.begin() + plan.m);
    }
}

double EvalDraws::rmse(const Vector& predictions, const Vector& truths) const {
    if (predictions.size() != eval_size_ || truths.size() != eval_size_) {
        throw ValidationError("subset-mean RMSE: predictions and truths must both have length " +
                              std::to_string(eval_size_));
    }
    const Vector diff = predictions - truths;
    if (plan_.m == 1) return std::sqrt(diff.squaredNorm() / static_cast<double>(eval_size_));
    double acc = 0.0;
    for (const auto& draw : draws_) {
        double s = 0.0;
        for (Index i : draw) s += diff(i);
        const double mean = s / static_cast<double>(plan_.m);
        acc += mean * mean;
    }
    return std::sqrt(acc / static_cast<double>(draws_.size()));
}

double subset_mean_rmse(const Vector& predictions, const Vector& truths, const EvalPlan& plan) {
    return EvalDraws(truths.size(), plan).rmse(predictions, truths);
}

void DescentCurve::validate() const {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const CurveRow& r = rows[i];
        if (i > 0 && r.complexity <= rows[i - 1].complexity) {
            throw ValidationError("descent curve: complexity must be strictly increasing");
        }
        auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
        if (!ok(r.in_rmse) || (r.out_rmse && !ok(*r.out_rmse)) || (r.coef_norm && !ok(*r.coef_norm))) {
            throw ValidationError("descent curve: non-finite or negative value at complexity " +
                                  std::to_string(r.complexity));
        }
    }
}

const CurveRow& DescentCurve::at(Index complexity) const {
    for (const CurveRow& r : rows) {
        if (r.complexity == complexity) return r;
    }
    throw ValidationError("descent curve has no row for complexity " + std::to_string(complexity));
}

std::vector<std::vector<Index>> make_orderings(Index k, const OrderingPlan& plan) {
    if (plan.count < 1) throw ValidationError("orderings: count must be >= 1");
    std::vector<std::vector<Index>> out;
    for (int o = 0; o < plan.count; ++o) {
        const auto stream = static_cast<std::uint64_t>(o);
        if (plan.pin_first && k > 1) {
            std::vector<Index> perm{0};
            for (Index j : random_ordering(k - 1, plan.seed, stream)) perm.push_back(j + 1);
            out.push_back(std::move(perm));
        } else if (plan.pin_first) {
            out.push_back({0});
        } else {
            out.push_back(random_ordering(k, plan.seed, stream));
        }
    }
    return out;
}

namespace {

struct TaskError {
    ErrorKind kind = ErrorKind::Numerical;
    std::string message;
    bool rank = false;
};

template <typename Task>
void run_tasks(std::size_t count, Execution exec, Task&& task) {
    if (exec == Execution::Serial) {
        for (std::size_t t = 0; t < count; ++t) task(t);
        return;
    }
    const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long t = 0; t < n; ++t) task(static_cast<std::size_t>(t));
}

[[noreturn]] void rethrow(const TaskError& e, const std::string& context) {
    const std::string msg = context + ": " + e.message;
    switch (e.kind) {
        case ErrorKind::Validation: throw ValidationError(msg);
        case ErrorKind::Io: throw IoError(msg);
        case ErrorKind::Numerical: break;
    }
    if (e.rank) throw RankError(msg);
    throw NumericalError(msg);
}

template <typename F>
std::optional<TaskError> capture(F&& f) {
    try {
        f();
    } catch (const RankError& e) {
        return TaskError{e.kind(), e.what(), true};
    } catch (const Error& e) {
        return TaskError{e.kind(), e.what()};
    } catch (const std::exception& e) {
        return TaskError{ErrorKind::Numerical, e.what()};
    }
    return std::nullopt;
}

void check_grid(const std::vector<Index>& grid, Index max_value, const char* what) {
    if (grid.empty()) throw ValidationError(std::string(what) + ": empty complexity grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < 1 || grid[i] > max_value) {
            throw ValidationError(std::string(what) + ": complexity " + std::to_string(grid[i]) +
                                  " outside [1, " + std::to_string(max_value) + "]");
        }
        if (i > 0 && grid[i] <= grid[i - 1]) {
            throw ValidationError(std::string(what) + ": complexity grid must be strictly increasing");
        }
    }
}

}  // namespace

OlsCurveResult ols_descent_curve(const RegressionDataset& train, const RegressionDataset& eval,
                                 const OrderingPlan& ordering_plan, const std::vector<EvalPlan>& evals,
                                 const std::vector<Index>& grid, RankTolerance tol, Execution exec) {
    train.validate();
    eval.validate();
    if (train.k() != eval.k()) {
        throw ValidationError("training and evaluation data have different columns (" + std::to_string(train.k()) +
                              " vs " + std::to_string(eval.k()) + ")");
    }
    if (evals.empty()) throw ValidationError("ols curve: need at least one eval plan");
    check_grid(grid, train.k(), "ols curve");

    OlsCurveResult out;
    out.evals = evals;
    out.orderings = make_orderings(train.k(), ordering_plan);
    std::vector<EvalDraws> draws;
    for (const EvalPlan& p : evals) draws.emplace_back(eval.n(), p);

    const std::size_t n_order = out.orderings.size();
    const std::size_t n_grid = grid.size();
    const std::size_t n_eval = evals.size();

    struct Slot {
        double in_rmse = 0.0;
        double coef_norm = 0.0;
        std::vector<double> out_rmse;
        std::optional<TaskError> error;
    };
    std::vector<Slot> slots(n_order * n_grid);

    run_tasks(slots.size(), exec, [&](std::size_t t) {
        const std::size_t o = t / n_grid;
        const std::size_t g = t % n_grid;
        Slot& slot = slots[t];
        slot.error = capture([&] {
            const FeatureSubset subset = FeatureSubset::prefix(out.orderings[o], grid[g], train.k());
            const SubsetFit fit = fit_subset(train, subset, tol);
            slot.in_rmse = fit.in_sample_rmse;
            slot.coef_norm = fit.norm;
            const Vector pred = eval.x * fit.beta;
            slot.out_rmse.resize(n_eval);
            for (std::size_t e = 0; e < n_eval; ++e) slot.out_rmse[e] = draws[e].rmse(pred, eval.y);
        });
    });

    for (std::size_t t = 0; t < slots.size(); ++t) {
        if (slots[t].error) {
            rethrow(*slots[t].error, "ols curve at complexity " + std::to_string(grid[t % n_grid]) +
                                         " (ordering " + std::to_string(t / n_grid) + ")");
        }
    }

    // Nested least squares: the training fit can only improve along an ordering.
    const double slack = 1e-10 * (1.0 + std::sqrt(train.y.squaredNorm() / static_cast<double>(train.n())));
    for (std::size_t o = 0; o < n_order; ++o) {
        for (std::size_t g = 1; g < n_grid; ++g) {
            if (slots[o * n_grid + g].in_rmse > slots[o * n_grid + g - 1].in_rmse + slack) {
                throw NumericalError("ols curve: in-sample RMSE increased from complexity " +
                                     std::to_string(grid[g - 1]) + " to " + std::to_string(grid[g]) +
                                     " (ordering " + std::to_string(o) + ")");
            }
        }
    }

    out.averaged.resize(n_eval);
    out.per_ordering.assign(n_eval, std::vector<DescentCurve>(n_order));
    for (std::size_t e = 0; e < n_eval; ++e) {
        for (std::size_t g = 0; g < n_grid; ++g) {
            double in_sum = 0.0, out_sum = 0.0, norm_sum = 0.0;
            for (std::size_t o = 0; o < n_order; ++o) {
                const Slot& s = slots[o * n_grid + g];
                in_sum += s.in_rmse;
                out_sum += s.out_rmse[e];
                norm_sum += s.coef_norm;
                out.per_ordering[e][o].rows.push_back({grid[g], s.in_rmse, s.out_rmse[e], s.coef_norm, 1});
            }
            const double c = static_cast<double>(n_order);
            out.averaged[e].rows.push_back(
                {grid[g], in_sum / c, out_sum / c, norm_sum / c, static_cast<Index>(n_order)});
        }
    }
    return out;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 acc = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        acc = acc * (n - k + i) / i;
        if (acc > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(acc);
}

std::vector<std::vector<Index>> donor_combinations(const std::vector<Index>& pool, Index size, std::uint64_t cap,
                                                   std::uint64_t seed) {
    const auto p = static_cast<Index>(pool.size());
    if (size < 1 || size > p) {
        throw ValidationError("complexity " + std::to_string(size) + " exceeds the donor pool size " +
                              std::to_string(p));
    }
    if (cap < 1) throw ValidationError("combination cap must be >= 1");
    std::vector<std::vector<Index>> out;
    if (binomial(static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(size)) <= cap) {
        std::vector<Index> pos(static_cast<std::size_t>(size));
        std::iota(pos.begin(), pos.end(), Index{0});
        while (true) {
            std::vector<Index> combo;
            combo.reserve(pos.size());
            for (Index q : pos) combo.push_back(pool[static_cast<std::size_t>(q)]);
            out.push_back(std::move(combo));
            Index i = size - 1;
            while (i >= 0 && pos[static_cast<std::size_t>(i)] == p - size + i) --i;
            if (i < 0) break;
            ++pos[static_cast<std::size_t>(i)];
            for (Index j = i + 1; j < size; ++j) pos[static_cast<std::size_t>(j)] = pos[static_cast<std::size_t>(j - 1)] + 1;
        }
        return out;
    }
    auto rng = make_rng(seed, RngPurpose::SubsetSampling, static_cast<std::uint64_t>(size));
    std::vector<Index> positions(pool.size());
    std::iota(positions.begin(), positions.end(), Index{0});
    std::set<std::vector<Index>> chosen;
    while (chosen.size() < cap) {
        for (Index i = 0; i < size; ++i) {
            std::uniform_int_distribution<Index> pick(i, p - 1);
            std::swap(positions[static_cast<std::size_t>(i)], positions[static_cast<std::size_t>(pick(rng))]);
        }
        std::vector<Index> picked(positions.begin(), positions.begin() + size);
        std::sort(picked.begin(), picked.end());
        for (Index& q : picked) q = pool[static_cast<std::size_t>(q)];
        chosen.insert(std::move(picked));
    }
    out.assign(chosen.begin(), chosen.end());
    return out;
}

ScCurveResult sc_descent_curve(const Panel& panel, const DonorSubset& pool, const std::vector<Index>& grid,
                               std::uint64_t cap, std::uint64_t seed, const SolverSettings& settings,
                               Execution exec) {
    panel.validate();
    settings.validate();
    if (pool.donors() != panel.donors()) throw ValidationError("sc curve: donor pool built for a different panel");
    check_grid(grid, pool.size(), "sc curve");

    ScCurveResult out;
    if (panel.post_periods == 0) out.warnings.push_back("no post-treatment periods: out_rmse is left empty");

    struct Task {
        std::size_t grid_pos;
        std::vector<Index> donors;
    };
    std::vector<Task> tasks;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        for (auto& combo : donor_combinations(pool.indices(), grid[g], cap, seed)) tasks.push_back({g, std::move(combo)});
    }

    struct Slot {
        double train_rmse = 0.0;
        std::optional<double> out_rmse;
        std::optional<TaskError> error;
    };
    std::vector<Slot> slots(tasks.size());
    run_tasks(tasks.size(), exec, [&](std::size_t t) {
        slots[t].error = capture([&] {
            const SynthFit fit = fit_synth(panel, DonorSubset(tasks[t].donors, panel.donors()), settings);
            slots[t].train_rmse = fit.train_rmse;
            slots[t].out_rmse = fit.out_rmse;
        });
    });

    for (std::size_t t = 0; t < slots.size(); ++t) {
        if (slots[t].error) {
            rethrow(*slots[t].error, "sc curve at complexity " + std::to_string(grid[tasks[t].grid_pos]));
        }
    }

    std::size_t t = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double train_sum = 0.0, out_sum = 0.0;
        Index count = 0;
        for (; t < tasks.size() && tasks[t].grid_pos == g; ++t, ++count) {
            train_sum += slots[t].train_rmse;
            if (slots[t].out_rmse) out_sum += *slots[t].out_rmse;
        }
        CurveRow row;
        row.complexity = grid[g];
        row.in_rmse = train_sum / static_cast<double>(count);
        if (panel.post_periods > 0) row.out_rmse = out_sum / static_cast<double>(count);
        row.n_models = count;
        out.curve.rows.push_back(row);
    }
    return out;
}

JensenCheck jensen_bound_check(double y, const Vector& preds_simple, double pred_complex,
                               const AveragingWeights& lambda, double ma_tol) {
    if (static_cast<Index>(lambda.weights.size()) != preds_simple.size()) {
        throw ValidationError("jensen_bound_check: weight and prediction counts differ");
    }
    lambda.validate(1e-9);
    double averaged = 0.0, rhs = 0.0;
    for (Index j = 0; j < preds_simple.size(); ++j) {
        const double w = lambda.weights[static_cast<std::size_t>(j)];
        averaged += w * preds_simple(j);
        rhs += w * (y - preds_simple(j)) * (y - preds_simple(j));
    }
    if (std::abs(averaged - pred_complex) > ma_tol * (1.0 + std::abs(pred_complex))) {
        throw ValidationError("jensen_bound_check: complex prediction is not the weighted average of the simple ones");
    }
    JensenCheck out;
    out.slack = rhs - (y - pred_complex) * (y - pred_complex);
    out.pass = out.slack >= -1e-9;
    return out;
}

PermutationSpec PermutationSpec::exhaustive() { return PermutationSpec{}; }

PermutationSpec PermutationSpec::uniform_random(int count, std::uint64_t seed) {
    PermutationSpec s;
    s.mode = Mode::UniformRandom;
    s.count = count;
    s.seed = seed;
    return s;
}

PermutationSpec PermutationSpec::explicit_list(std::vector<std::vector<Index>> perms) {
    PermutationSpec s;
    s.mode = Mode::Explicit;
    s.perms = std::move(perms);
    return s;
}

std::vector<std::vector<Index>> all_permutations(Index size) {
    if (size < 1 || size > 8) throw ValidationError("exhaustive permutations need 1 <= |J| <= 8");
    std::vector<Index> p(static_cast<std::size_t>(size));
    std::iota(p.begin(), p.end(), Index{0});
    std::vector<std::vector<Index>> out;
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

PermutationReport permutation_audit(const ModelAverage& model, const Vector& truths, const PermutationSpec& spec) {
    const Index size = model.simple_predictions.cols();
    if (static_cast<Index>(model.lambda.weights.size()) != size) {
        throw ValidationError("permutation_audit: weight count does not match the simple models");
    }
    if (model.simple_predictions.rows() != truths.size() || truths.size() == 0) {
        throw ValidationError("permutation_audit: predictions and truths differ in length");
    }
    model.lambda.validate(1e-9);

    std::vector<std::vector<Index>> perms;
    switch (spec.mode) {
        case PermutationSpec::Mode::Exhaustive: perms = all_permutations(size); break;
        case PermutationSpec::Mode::UniformRandom:
            if (spec.count < 1) throw ValidationError("permutation_audit: need a positive permutation count");
            for (int i = 0; i < spec.count; ++i) perms.push_back(random_ordering(size, spec.seed, static_cast<std::uint64_t>(i)));
            break;
        case PermutationSpec::Mode::Explicit:
            perms = spec.perms;
            if (perms.empty()) throw ValidationError("permutation_audit: empty permutation list");
            for (const auto& p : perms) {
                std::vector<Index> sorted = p;
                std::sort(sorted.begin(), sorted.end());
                for (Index i = 0; i < size; ++i) {
                    if (static_cast<Index>(sorted.size()) != size || sorted[static_cast<std::size_t>(i)] != i) {
                        throw ValidationError("permutation_audit: not a bijection on the model index set");
                    }
                }
            }
            break;
    }

    const Vector lambda = Eigen::Map<const Vector>(model.lambda.weights.data(), size);
    const double rows = static_cast<double>(truths.size());
    auto mse = [&](const Vector& pred) { return (truths - pred).squaredNorm() / rows; };

    PermutationReport r;
    r.mse_complex = mse(model.simple_predictions * lambda);
    for (const auto& p : perms) {
        Vector permuted(size);
        for (Index j = 0; j < size; ++j) permuted(j) = lambda(p[static_cast<std::size_t>(j)]);
        r.mse_permuted.push_back(mse(model.simple_predictions * permuted));
    }
    r.mean_permuted = std::accumulate(r.mse_permuted.begin(), r.mse_permuted.end(), 0.0) /
                      static_cast<double>(r.mse_permuted.size());
    for (Index j = 0; j < size; ++j) r.mse_simple.push_back(mse(model.simple_predictions.col(j)));
    r.mean_simple = std::accumulate(r.mse_simple.begin(), r.mse_simple.end(), 0.0) / static_cast<double>(size);
    r.premise_all = std::all_of(r.mse_permuted.begin(), r.mse_permuted.end(),
                                [&](double b) { return r.mse_complex <= b; });
    r.premise_slack = r.mean_permuted - r.mse_complex;
    r.premise_mean = r.premise_slack >= 0.0;
    r.conclusion_slack = r.mean_simple - r.mse_complex;
    r.conclusion = r.conclusion_slack >= 0.0;
    return r;
}

}  // namespace descent
