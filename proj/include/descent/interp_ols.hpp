#pragma once

// Subset linear regression with minimum-norm tie-breaking, leverage-based
// model-averaging weights over leave-one-out submodels, and the variance and
// variation diagnostics of the interpolating regime.
//
// Column indices are 0-based throughout.

#include "descent/numcore.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace descent {

struct RegressionDataset {
    Matrix x;                               // n x k
    Vector y;                               // n
    std::vector<std::string> column_names;  // empty or k labels

    RegressionDataset() = default;
    RegressionDataset(Matrix x, Vector y, std::vector<std::string> names = {});

    Index n() const { return x.rows(); }
    Index k() const { return x.cols(); }
    void validate() const;
};

// Ordered, distinct, nonempty set of column indices.
class FeatureSubset {
public:
    FeatureSubset() = default;
    FeatureSubset(std::vector<Index> indices, Index k);

    // {first, ..., first + count - 1} of an ordering.
    static FeatureSubset prefix(const std::vector<Index>& order, Index count, Index k);

    const std::vector<Index>& indices() const { return indices_; }
    Index size() const { return static_cast<Index>(indices_.size()); }
    Index k() const { return k_; }
    FeatureSubset without(Index position) const;

private:
    std::vector<Index> indices_;
    Index k_ = 0;
};

struct SubsetFit {
    Vector beta;  // length k, zero outside the subset
    FeatureSubset subset;
    double in_sample_rmse = 0.0;
    double norm = 0.0;
};

// lambda over the members of J, in the order of J.indices().
struct AveragingWeights {
    std::vector<double> weights;

    double sum() const;
    // Throws if any weight leaves [0, 1] or the sum misses 1 by more than tol.
    void validate(double tol = 1e-10) const;
};

SubsetFit fit_subset(const RegressionDataset& data, const FeatureSubset& subset,
                     RankTolerance tol = {});

// lambda_j = (1 - h_j) / (|J| - n) with h_j the leverage of column j inside X_J.
// Requires |J| > n and X_J of full row rank. Leverages within tol.rel_tol of 1
// get weight exactly zero.
AveragingWeights averaging_weights(const RegressionDataset& data, const FeatureSubset& subset,
                                   RankTolerance tol = {});

enum class LooMethod {
    Recompute,        // refit every J \ {j} from scratch
    ShermanMorrison,  // rank-one downdate of (X_J X_J')^{-1}
};

// Fits of J \ {j} for every member j of J, in the order of J.indices().
// Submodels carrying zero averaging weight (leverage 1) are fit without the
// rank check; every other submodel must have full row rank.
std::vector<SubsetFit> leave_one_out_fits(const RegressionDataset& data, const FeatureSubset& subset,
                                          RankTolerance tol = {},
                                          LooMethod method = LooMethod::Recompute);

// The complex fit, its submodels and weights, plus ||beta^J - sum lambda_j beta^{J\j}||.
struct AveragingDecomposition {
    SubsetFit full;
    std::vector<SubsetFit> loo;
    AveragingWeights lambda;
    double residual = 0.0;
};

AveragingDecomposition averaging_decomposition(const RegressionDataset& data,
                                               const FeatureSubset& subset, RankTolerance tol = {},
                                               LooMethod method = LooMethod::Recompute);

struct Euclidean {};
struct DesignWeighted {
    const Matrix* x;  // the design that produced both fits
};

// ||beta_A - beta_B|| or ||beta_A - beta_B||_{X'X} = ||X (beta_A - beta_B)||.
double variation_distance(const SubsetFit& a, const SubsetFit& b, Euclidean);
double variation_distance(const SubsetFit& a, const SubsetFit& b, DesignWeighted metric);

// noise_var * trace((X_J X_J')^{-1}): the conditional trace variance of the
// minimum-norm interpolator under homoskedastic noise. Requires |J| > n.
double trace_variance_interpolating(const Matrix& x, const FeatureSubset& subset, double noise_var,
                                    RankTolerance tol = {});

// Empirical trace of Var(beta_hat^J | X) over redraws Y = X beta_true + N(0, noise_var I).
double monte_carlo_trace_variance(const Matrix& x, const FeatureSubset& subset,
                                  const Vector& beta_true, double noise_var, int draws,
                                  std::uint64_t seed, RankTolerance tol = {});

double coefficient_norm(const SubsetFit& fit);

}  // namespace descent
