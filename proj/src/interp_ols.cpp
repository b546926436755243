#include "descent/interp_ols.hpp"

#include "descent/errors.hpp"
#include "descent/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

namespace descent {

RegressionDataset::RegressionDataset(Matrix x_, Vector y_, std::vector<std::string> names)
    : x(std::move(x_)), y(std::move(y_)), column_names(std::move(names)) {
    validate();
}

void RegressionDataset::validate() const {
    require_finite(x, "RegressionDataset.X");
    require_finite(y, "RegressionDataset.Y");
    if (x.rows() != y.size()) {
        throw ValidationError("RegressionDataset: X has " + std::to_string(x.rows()) +
                              " rows but Y has length " + std::to_string(y.size()));
    }
    if (!column_names.empty() && static_cast<Index>(column_names.size()) != x.cols()) {
        throw ValidationError("RegressionDataset: column name count does not match X");
    }
}

FeatureSubset::FeatureSubset(std::vector<Index> indices, Index k) : indices_(std::move(indices)), k_(k) {
    if (indices_.empty()) throw ValidationError("FeatureSubset: empty subset");
    std::unordered_set<Index> seen;
    for (Index j : indices_) {
        if (j < 0 || j >= k) {
            throw ValidationError("FeatureSubset: index " + std::to_string(j) + " outside [0, " +
                                  std::to_string(k) + ")");
        }
        if (!seen.insert(j).second) {
            throw ValidationError("FeatureSubset: duplicate index " + std::to_string(j));
        }
    }
}

FeatureSubset FeatureSubset::prefix(const std::vector<Index>& order, Index count, Index k) {
    if (count < 1 || count > static_cast<Index>(order.size())) {
        throw ValidationError("FeatureSubset::prefix: count " + std::to_string(count) +
                              " outside [1, " + std::to_string(order.size()) + "]");
    }
    return FeatureSubset(std::vector<Index>(order.begin(), order.begin() + count), k);
}

FeatureSubset FeatureSubset::without(Index position) const {
    if (position < 0 || position >= size()) throw ValidationError("FeatureSubset::without: bad position");
    if (size() == 1) throw ValidationError("FeatureSubset::without: result would be empty");
    std::vector<Index> rest;
    rest.reserve(indices_.size() - 1);
    for (Index p = 0; p < size(); ++p) {
        if (p != position) rest.push_back(indices_[static_cast<std::size_t>(p)]);
    }
    return FeatureSubset(std::move(rest), k_);
}

double AveragingWeights::sum() const {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

void AveragingWeights::validate(double tol) const {
    for (double w : weights) {
        if (!(w >= 0.0 && w <= 1.0)) {
            throw NumericalError("AveragingWeights: weight " + std::to_string(w) + " outside [0, 1]");
        }
    }
    if (std::abs(sum() - 1.0) > tol) {
        throw NumericalError("AveragingWeights: weights sum to " + std::to_string(sum()));
    }
}

namespace {

void check_subset(const RegressionDataset& data, const FeatureSubset& subset) {
    data.validate();
    if (subset.k() != data.k()) {
        throw ValidationError("subset was built for k = " + std::to_string(subset.k()) +
                              " but the data has k = " + std::to_string(data.k()));
    }
}

SubsetFit assemble_fit(const RegressionDataset& data, const FeatureSubset& subset,
                       const Matrix& xj, const Vector& beta_j) {
    SubsetFit fit;
    fit.subset = subset;
    fit.beta = Vector::Zero(data.k());
    for (Index p = 0; p < subset.size(); ++p) fit.beta(subset.indices()[static_cast<std::size_t>(p)]) = beta_j(p);
    const Vector resid = data.y - xj * beta_j;
    fit.in_sample_rmse = std::sqrt(resid.squaredNorm() / static_cast<double>(data.n()));
    fit.norm = fit.beta.norm();
    return fit;
}

void check_regime_rank(const Svd& svd, Index n, Index size, const FeatureSubset& subset) {
    const Index needed = std::min(n, size);
    if (svd.rank < needed) {
        throw RankError("X_J with |J| = " + std::to_string(subset.size()) + " has rank " +
                        std::to_string(svd.rank) + " < " + std::to_string(needed) +
                        (size > n ? " (full row rank required)" : " (full column rank required)"));
    }
}

SubsetFit fit_unchecked(const RegressionDataset& data, const FeatureSubset& subset, RankTolerance tol) {
    const Matrix xj = select_columns(data.x, subset.indices());
    return assemble_fit(data, subset, xj, min_norm_least_squares(xj, data.y, tol));
}

// Leverages of X_J, clamped to [0, 1].
Vector subset_leverages(const Svd& svd) {
    Vector h = svd.v.rowwise().squaredNorm();
    return h.cwiseMax(0.0).cwiseMin(1.0);
}

AveragingWeights weights_from_leverages(const Vector& h, Index n, RankTolerance tol) {
    const Index size = h.size();
    AveragingWeights out;
    out.weights.resize(static_cast<std::size_t>(size));
    const double denom = static_cast<double>(size - n);
    for (Index p = 0; p < size; ++p) {
        const double slack = 1.0 - h(p);
        out.weights[static_cast<std::size_t>(p)] = slack <= tol.rel_tol ? 0.0 : slack / denom;
    }
    // sum(1 - h) = |J| - n holds exactly in exact arithmetic; renormalize the rounding.
    const double total = out.sum();
    for (double& w : out.weights) w /= total;
    return out;
}

}  // namespace

SubsetFit fit_subset(const RegressionDataset& data, const FeatureSubset& subset, RankTolerance tol) {
    check_subset(data, subset);
    const Matrix xj = select_columns(data.x, subset.indices());
    const Svd svd = Svd::compute(xj, tol);
    check_regime_rank(svd, data.n(), subset.size(), subset);
    return assemble_fit(data, subset, xj, svd.solve(data.y));
}

AveragingWeights averaging_weights(const RegressionDataset& data, const FeatureSubset& subset,
                                   RankTolerance tol) {
    check_subset(data, subset);
    if (subset.size() <= data.n()) {
        throw ValidationError("averaging weights need |J| > n (got |J| = " + std::to_string(subset.size()) +
                              ", n = " + std::to_string(data.n()) + ")");
    }
    const Matrix xj = select_columns(data.x, subset.indices());
    const Svd svd = Svd::compute(xj, tol);
    check_regime_rank(svd, data.n(), subset.size(), subset);
    return weights_from_leverages(subset_leverages(svd), data.n(), tol);
}

std::vector<SubsetFit> leave_one_out_fits(const RegressionDataset& data, const FeatureSubset& subset,
                                          RankTolerance tol, LooMethod method) {
    check_subset(data, subset);
    if (subset.size() < 2) throw ValidationError("leave-one-out fits need |J| >= 2");
    const Index n = data.n();
    const Index size = subset.size();
    const bool interpolating = size > n;

    std::vector<SubsetFit> out;
    out.reserve(static_cast<std::size_t>(size));

    if (!interpolating) {
        if (method == LooMethod::ShermanMorrison) {
            throw ValidationError("the Sherman-Morrison leave-one-out path needs |J| > n");
        }
        for (Index p = 0; p < size; ++p) out.push_back(fit_subset(data, subset.without(p), tol));
        return out;
    }

    const Matrix xj = select_columns(data.x, subset.indices());
    const Svd svd = Svd::compute(xj, tol);
    check_regime_rank(svd, n, size, subset);
    const AveragingWeights lambda = weights_from_leverages(subset_leverages(svd), n, tol);

    if (method == LooMethod::Recompute) {
        for (Index p = 0; p < size; ++p) {
            const FeatureSubset sub = subset.without(p);
            const bool zero_weight = lambda.weights[static_cast<std::size_t>(p)] == 0.0;
            out.push_back(zero_weight ? fit_unchecked(data, sub, tol) : fit_subset(data, sub, tol));
        }
        return out;
    }

    // (X_{J\j} X_{J\j}')^{-1} = G^{-1} + G^{-1} x_j x_j' G^{-1} / (1 - h_j), G = X_J X_J'.
    const Matrix ginv = svd.u * svd.sigma.array().square().inverse().matrix().asDiagonal() *
                        svd.u.transpose();
    const Vector a = ginv * data.y;
    const Vector beta_full = xj.transpose() * a;
    for (Index p = 0; p < size; ++p) {
        const FeatureSubset sub = subset.without(p);
        if (lambda.weights[static_cast<std::size_t>(p)] == 0.0) {
            out.push_back(fit_unchecked(data, sub, tol));
            continue;
        }
        const Vector q = ginv * xj.col(p);
        const double h = xj.col(p).dot(q);
        const double s = beta_full(p);
        Vector beta = beta_full + (xj.transpose() * q) * (s / (1.0 - h));
        beta(p) = 0.0;
        Vector beta_sub(size - 1);
        for (Index i = 0, o = 0; i < size; ++i) {
            if (i != p) beta_sub(o++) = beta(i);
        }
        out.push_back(assemble_fit(data, sub, select_columns(data.x, sub.indices()), beta_sub));
    }
    return out;
}

AveragingDecomposition averaging_decomposition(const RegressionDataset& data,
                                               const FeatureSubset& subset, RankTolerance tol,
                                               LooMethod method) {
    AveragingDecomposition dec;
    dec.full = fit_subset(data, subset, tol);
    dec.lambda = averaging_weights(data, subset, tol);
    dec.loo = leave_one_out_fits(data, subset, tol, method);
    Vector combo = Vector::Zero(data.k());
    for (std::size_t p = 0; p < dec.loo.size(); ++p) combo += dec.lambda.weights[p] * dec.loo[p].beta;
    dec.residual = (dec.full.beta - combo).norm();
    return dec;
}

double variation_distance(const SubsetFit& a, const SubsetFit& b, Euclidean) {
    if (a.beta.size() != b.beta.size()) throw ValidationError("variation_distance: fits differ in k");
    return (a.beta - b.beta).norm();
}

double variation_distance(const SubsetFit& a, const SubsetFit& b, DesignWeighted metric) {
    if (a.beta.size() != b.beta.size()) throw ValidationError("variation_distance: fits differ in k");
    if (metric.x == nullptr || metric.x->cols() != a.beta.size()) {
        throw ValidationError("variation_distance: design matrix does not match the fits");
    }
    return (*metric.x * (a.beta - b.beta)).norm();
}

double trace_variance_interpolating(const Matrix& x, const FeatureSubset& subset, double noise_var,
                                    RankTolerance tol) {
    require_finite(x, "trace_variance_interpolating");
    if (!(noise_var > 0.0) || !std::isfinite(noise_var)) {
        throw ValidationError("trace_variance_interpolating: noise variance must be positive");
    }
    if (subset.k() != x.cols()) throw ValidationError("trace_variance_interpolating: subset/k mismatch");
    if (subset.size() <= x.rows()) {
        throw ValidationError("trace_variance_interpolating: needs |J| > n");
    }
    return noise_var * inverse_gram_trace(select_columns(x, subset.indices()), tol);
}

double monte_carlo_trace_variance(const Matrix& x, const FeatureSubset& subset, const Vector& beta_true,
                                  double noise_var, int draws, std::uint64_t seed, RankTolerance tol) {
    if (draws < 2) throw ValidationError("monte_carlo_trace_variance: need at least two draws");
    if (beta_true.size() != x.cols()) throw ValidationError("monte_carlo_trace_variance: beta length");
    auto rng = make_rng(seed, RngPurpose::MonteCarlo);
    std::normal_distribution<double> noise(0.0, std::sqrt(noise_var));
    const Vector mean_y = x * beta_true;
    RegressionDataset data(x, mean_y);

    // Welford accumulation per coordinate.
    Vector mean = Vector::Zero(x.cols());
    Vector m2 = Vector::Zero(x.cols());
    for (int d = 0; d < draws; ++d) {
        for (Index i = 0; i < data.y.size(); ++i) data.y(i) = mean_y(i) + noise(rng);
        const Vector b = fit_subset(data, subset, tol).beta;
        const Vector delta = b - mean;
        mean += delta / static_cast<double>(d + 1);
        m2 += delta.cwiseProduct(b - mean);
    }
    return m2.sum() / static_cast<double>(draws - 1);
}

double coefficient_norm(const SubsetFit& fit) { return fit.beta.norm(); }

}  // namespace descent
