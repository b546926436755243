#pragma once

// Dense linear-algebra kernel shared by the regression and synthetic-control
// estimators: SVD-based minimum-norm least squares, feature leverages and
// row-space projections. All routines are pure and deterministic.

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace descent {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Singular values below rel_tol * sigma_max count as zero.
struct RankTolerance {
    double rel_tol = 1e-10;

    RankTolerance() = default;
    explicit RankTolerance(double rel);
};

void require_finite(const Matrix& a, const char* what);
void require_finite(const Vector& v, const char* what);

// Thin SVD of a matrix together with the rank it implies under a tolerance.
struct Svd {
    Matrix u;       // rows x r0, r0 = min(rows, cols)
    Vector sigma;   // r0, descending
    Matrix v;       // cols x r0
    Index rank = 0;

    static Svd compute(const Matrix& a, RankTolerance tol);

    // Pseudoinverse (truncated at rank) applied to b.
    Vector solve(const Vector& b) const;
};

Index numerical_rank(const Matrix& a, RankTolerance tol);

// Unique minimum-Euclidean-norm minimizer of ||A beta - b||^2 (pseudoinverse
// applied to b). Rank deficiency is resolved by truncation, not reported.
Vector min_norm_least_squares(const Matrix& a, const Vector& b, RankTolerance tol = {});

// Leverage h_j = A_j' (A A')^{-1} A_j of column j. Requires full row rank.
double feature_leverage(const Matrix& a, Index j, RankTolerance tol = {});

// All column leverages at once; sums to rows(A).
Vector feature_leverages(const Matrix& a, RankTolerance tol = {});

// Pi = A' (A A')^{-1} A, the orthogonal projector onto the row space of A.
Matrix row_space_projection(const Matrix& a, RankTolerance tol = {});

// trace((A A')^{-1}) for full-row-rank A.
double inverse_gram_trace(const Matrix& a, RankTolerance tol = {});

// Columns of A listed in cols, in that order.
Matrix select_columns(const Matrix& a, std::span<const Index> cols);

}  // namespace descent
