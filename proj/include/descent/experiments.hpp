#pragma once

// Risk-versus-complexity sweeps for both estimator families and the
// model-averaging risk audits.
//
// Sweep points are independent tasks. Every kernel has a serial reference
// implementation and an OpenMP one; both write into per-task slots and reduce
// in task order, so they produce bit-identical results.

#include "descent/interp_ols.hpp"
#include "descent/synth_control.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace descent {

enum class Execution { Serial, Parallel };

struct EvalPlan {
    Index m = 1;          // subset size; m = 1 is the plain observation-level RMSE
    int num_draws = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

// Size-m index draws without replacement, generated once per plan so every
// model in a sweep is scored on the same draws.
class EvalDraws {
public:
    EvalDraws(Index eval_size, const EvalPlan& plan);

    // sqrt(mean over draws of (mean prediction - mean truth)^2); plain RMSE when m = 1.
    double rmse(const Vector& predictions, const Vector& truths) const;

    Index eval_size() const { return eval_size_; }
    const EvalPlan& plan() const { return plan_; }

private:
    Index eval_size_;
    EvalPlan plan_;
    std::vector<std::vector<Index>> draws_;
};

double subset_mean_rmse(const Vector& predictions, const Vector& truths, const EvalPlan& plan);

struct CurveRow {
    Index complexity = 0;
    double in_rmse = 0.0;
    std::optional<double> out_rmse;
    std::optional<double> coef_norm;
    Index n_models = 0;
};

struct DescentCurve {
    std::vector<CurveRow> rows;

    // Strictly increasing complexity, finite nonnegative RMSEs.
    void validate() const;
    const CurveRow& at(Index complexity) const;
};

struct OrderingPlan {
    int count = 5;
    std::uint64_t seed = 0;
    // Keep column 0 (the intercept) first in every ordering.
    bool pin_first = false;
};

std::vector<std::vector<Index>> make_orderings(Index k, const OrderingPlan& plan);

struct OlsCurveResult {
    std::vector<std::vector<Index>> orderings;
    std::vector<EvalPlan> evals;
    std::vector<DescentCurve> averaged;                  // [eval plan]
    std::vector<std::vector<DescentCurve>> per_ordering;  // [eval plan][ordering]
};

// For each ordering and each l in the grid: minimum-norm fit on the first l
// columns, in-sample RMSE, out-of-sample subset-mean RMSE per eval plan and the
// coefficient norm. Curves are averaged pointwise over orderings.
OlsCurveResult ols_descent_curve(const RegressionDataset& train, const RegressionDataset& eval,
                                 const OrderingPlan& orderings, const std::vector<EvalPlan>& evals,
                                 const std::vector<Index>& grid, RankTolerance tol = {},
                                 Execution exec = Execution::Parallel);

// Donor subsets of size l: all of them when C(pool, l) <= cap, otherwise cap
// distinct subsets sampled with a seeded generator. Sorted lexicographically.
std::vector<std::vector<Index>> donor_combinations(const std::vector<Index>& pool, Index size,
                                                   std::uint64_t cap, std::uint64_t seed);

// C(n, k), saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

struct ScCurveResult {
    DescentCurve curve;  // in_rmse holds the training RMSE; n_models counts subsets
    std::vector<std::string> warnings;
};

ScCurveResult sc_descent_curve(const Panel& panel, const DonorSubset& pool, const std::vector<Index>& grid,
                               std::uint64_t cap, std::uint64_t seed, const SolverSettings& settings = {},
                               Execution exec = Execution::Parallel);

struct JensenCheck {
    bool pass = false;
    double slack = 0.0;  // sum_j lambda_j (y - f_j)^2 - (y - f*)^2
};

// Squared-error portfolio bound for a model average. Throws ValidationError
// when pred_complex is not the lambda-average of preds_simple within ma_tol.
JensenCheck jensen_bound_check(double y, const Vector& preds_simple, double pred_complex,
                               const AveragingWeights& lambda, double ma_tol = 1e-8);

struct PermutationSpec {
    enum class Mode { Explicit, UniformRandom, Exhaustive };
    Mode mode = Mode::Exhaustive;
    std::vector<std::vector<Index>> perms;  // Explicit
    int count = 0;                          // UniformRandom
    std::uint64_t seed = 0;                 // UniformRandom

    static PermutationSpec exhaustive();
    static PermutationSpec uniform_random(int count, std::uint64_t seed);
    static PermutationSpec explicit_list(std::vector<std::vector<Index>> perms);
};

// A complex model represented as lambda-average of simple models, scored on an evaluation set.
struct ModelAverage {
    AveragingWeights lambda;
    Matrix simple_predictions;  // eval rows x |J|
};

struct PermutationReport {
    double mse_complex = 0.0;                // a
    std::vector<double> mse_permuted;        // b, one per permutation
    double mean_permuted = 0.0;
    std::vector<double> mse_simple;
    double mean_simple = 0.0;                // c
    bool premise_all = false;                // a <= b_pi for every pi
    bool premise_mean = false;               // a <= mean b
    bool conclusion = false;                 // a <= c
    double premise_slack = 0.0;              // mean b - a
    double conclusion_slack = 0.0;           // c - a
};

// Empirical diagnostics for the permutation condition and the resulting bound.
PermutationReport permutation_audit(const ModelAverage& model, const Vector& truths, const PermutationSpec& perms);

std::vector<std::vector<Index>> all_permutations(Index size);

}  // namespace descent
