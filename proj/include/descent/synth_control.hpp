#pragma once

// Synthetic control on outcome panels: simplex-constrained least squares,
// the ridge-penalized variant, the minimum-norm estimator defined as the
// eta -> 0 limit of the ridge path, imputation, and the decomposition of a
// complex synthetic control into a convex combination of its leave-one-out
// submodels.
//
// Solver-level functions work in the local coordinates of a donor subset:
// pre_controls is T x |J| and the returned weights have length |J|.

#include "descent/interp_ols.hpp"
#include "descent/numcore.hpp"
#include "descent/simplex_qp.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace descent {

// Row 0 is the target unit; rows 1..N are donors. Columns are T pre-periods
// followed by S post-periods.
struct Panel {
    Matrix outcomes;
    Index pre_periods = 0;   // T
    Index post_periods = 0;  // S
    std::vector<std::string> unit_names;

    Panel() = default;
    Panel(Matrix outcomes, Index pre, Index post, std::vector<std::string> names = {});

    Index donors() const { return outcomes.rows() - 1; }
    void validate() const;

    Vector pre_target() const;
    Vector post_target() const;
    Matrix pre_controls() const;   // T x N
    Matrix post_controls() const;  // S x N
};

// Ordered, distinct, nonempty donor indices in [0, N). Donor i is panel row i + 1.
class DonorSubset {
public:
    DonorSubset() = default;
    DonorSubset(std::vector<Index> indices, Index donors);
    static DonorSubset all(Index donors);

    const std::vector<Index>& indices() const { return indices_; }
    Index size() const { return static_cast<Index>(indices_.size()); }
    Index donors() const { return donors_; }

private:
    std::vector<Index> indices_;
    Index donors_ = 0;
};

struct SimplexWeights {
    Vector w;

    // Nonnegative entries summing to one within tol.
    void validate(double tol = 1e-9) const;
};

struct RidgePenalty {
    double eta;
    explicit RidgePenalty(double eta);
};

struct SolverSettings {
    double opt_tol = 1e-8;
    int max_iter = 1000;
    std::vector<double> path{1e-2, 1e-4, 1e-6, 1e-8};  // strictly decreasing ridge penalties
    double path_tol = 1e-6;  // successive path solutions closer than this are accepted

    void validate() const;
    QpOptions qp() const;
};

SimplexWeights simplex_lsq(const Matrix& pre_controls, const Vector& pre_target,
                           const SolverSettings& settings = {});

SimplexWeights ridge_synth(const Matrix& pre_controls, const Vector& pre_target, RidgePenalty eta,
                           const SolverSettings& settings = {});

// ||y - A w||^2 + eta ||w||^2.
double synth_objective(const Matrix& pre_controls, const Vector& pre_target, double eta,
                       const Vector& w);

enum class MinNormRoute {
    Auto,       // ridge path, falling back to the two-stage solve when the path is not Cauchy
    RidgePath,  // ridge path only; inconsistency is reported, not repaired
    TwoStage,   // minimize the fit, then the norm over the weights attaining that fit
};

struct MinNormResult {
    SimplexWeights weights;
    MinNormRoute route_used = MinNormRoute::RidgePath;
    bool path_consistent = false;
    std::vector<double> path_steps;  // max-abs change between successive path solutions
};

MinNormResult min_norm_synth_detailed(const Matrix& pre_controls, const Vector& pre_target,
                                      const SolverSettings& settings = {},
                                      MinNormRoute route = MinNormRoute::Auto);

SimplexWeights min_norm_synth(const Matrix& pre_controls, const Vector& pre_target,
                              const SolverSettings& settings = {});

struct ScDecomposition {
    AveragingWeights lambda;
    double residual = 0.0;
};

// Convex weights lambda minimizing ||full - sum_j lambda_j loo[j]|| (ties broken
// by minimum norm). All vectors share one coordinate system; loo[j] must vanish
// at coordinate j. Throws NumericalError when the residual exceeds tol.
ScDecomposition sc_averaging_decomposition(const Vector& full, std::span<const Vector> loo, double tol,
                                           const SolverSettings& settings = {});

// Solves the complex model and every leave-one-out submodel on pre_controls
// (T x |J|, local coordinates) and decomposes. With a penalty, the fixed-eta
// ridge estimator is used throughout instead of the minimum-norm one.
struct ScAveraging {
    Vector full;
    std::vector<Vector> loo;
    ScDecomposition decomposition;
};

ScAveraging sc_model_averaging(const Matrix& pre_controls, const Vector& pre_target, double tol,
                               const SolverSettings& settings = {},
                               std::optional<RidgePenalty> penalty = std::nullopt);

// post_controls (S x m) times weights (length m). Each value lies in the donor range of its period.
Vector impute(const SimplexWeights& weights, const Matrix& post_controls);

// Subset-local weights scattered into an N-vector.
SimplexWeights embed(const SimplexWeights& local, const DonorSubset& subset);

struct SynthFit {
    SimplexWeights weights;  // length N, zero outside the subset
    double train_rmse = 0.0;
    std::optional<double> out_rmse;  // absent when S = 0
};

// Minimum-norm synthetic control for the target on a donor subset, with
// training and out-of-time RMSE.
SynthFit fit_synth(const Panel& panel, const DonorSubset& subset, const SolverSettings& settings = {});

}  // namespace descent
