#include "descent/numcore.hpp"

#include "descent/errors.hpp"

#include <cmath>
#include <string>

namespace descent {

RankTolerance::RankTolerance(double rel) : rel_tol(rel) {
    if (!(rel >= 0.0 && rel < 1.0)) {
        throw ValidationError("rank tolerance must lie in [0, 1), got " + std::to_string(rel));
    }
}

void require_finite(const Matrix& a, const char* what) {
    if (a.rows() < 1 || a.cols() < 1) {
        throw ValidationError(std::string(what) + ": matrix must have at least one row and column");
    }
    if (!a.allFinite()) throw ValidationError(std::string(what) + ": non-finite entry");
}

void require_finite(const Vector& v, const char* what) {
    if (!v.allFinite()) throw ValidationError(std::string(what) + ": non-finite entry");
}

Svd Svd::compute(const Matrix& a, RankTolerance tol) {
    Svd out;
    Eigen::JacobiSVD<Matrix, Eigen::ColPivHouseholderQRPreconditioner> svd(
        a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = svd.matrixU();
    out.sigma = svd.singularValues();
    out.v = svd.matrixV();
    const double smax = out.sigma.size() > 0 ? out.sigma(0) : 0.0;
    const double cut = tol.rel_tol * smax;
    out.rank = 0;
    if (smax > 0.0) {
        for (Index i = 0; i < out.sigma.size(); ++i) {
            if (out.sigma(i) > cut) ++out.rank;
        }
    }
    return out;
}

Vector Svd::solve(const Vector& b) const {
    if (rank == 0) return Vector::Zero(v.rows());
    Vector coeffs = u.leftCols(rank).transpose() * b;
    coeffs.array() /= sigma.head(rank).array();
    return v.leftCols(rank) * coeffs;
}

Index numerical_rank(const Matrix& a, RankTolerance tol) {
    require_finite(a, "numerical_rank");
    return Svd::compute(a, tol).rank;
}

Vector min_norm_least_squares(const Matrix& a, const Vector& b, RankTolerance tol) {
    require_finite(a, "min_norm_least_squares");
    require_finite(b, "min_norm_least_squares");
    if (a.rows() != b.size()) {
        throw ValidationError("min_norm_least_squares: A has " + std::to_string(a.rows()) +
                              " rows but b has length " + std::to_string(b.size()));
    }
    return Svd::compute(a, tol).solve(b);
}

namespace {

Svd full_row_rank_svd(const Matrix& a, RankTolerance tol, const char* what) {
    require_finite(a, what);
    if (a.cols() < a.rows()) {
        throw RankError(std::string(what) + ": need at least as many columns as rows (" +
                        std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ")");
    }
    Svd svd = Svd::compute(a, tol);
    if (svd.rank < a.rows()) {
        throw RankError(std::string(what) + ": matrix has rank " + std::to_string(svd.rank) +
                        " < " + std::to_string(a.rows()) + " rows");
    }
    return svd;
}

}  // namespace

// With A = U S V' of full row rank, A_j = U S V'_j and (AA')^{-1} = U S^-2 U',
// so h_j is the squared norm of row j of V.
double feature_leverage(const Matrix& a, Index j, RankTolerance tol) {
    if (j < 0 || j >= a.cols()) {
        throw ValidationError("feature_leverage: column index " + std::to_string(j) +
                              " out of range [0, " + std::to_string(a.cols()) + ")");
    }
    const Svd svd = full_row_rank_svd(a, tol, "feature_leverage");
    return svd.v.row(j).squaredNorm();
}

Vector feature_leverages(const Matrix& a, RankTolerance tol) {
    const Svd svd = full_row_rank_svd(a, tol, "feature_leverages");
    return svd.v.rowwise().squaredNorm();
}

Matrix row_space_projection(const Matrix& a, RankTolerance tol) {
    const Svd svd = full_row_rank_svd(a, tol, "row_space_projection");
    const Matrix& v = svd.v;
    Matrix pi = v * v.transpose();
    // Exact symmetry regardless of summation order.
    return (0.5 * (pi + pi.transpose())).eval();
}

double inverse_gram_trace(const Matrix& a, RankTolerance tol) {
    const Svd svd = full_row_rank_svd(a, tol, "inverse_gram_trace");
    return svd.sigma.array().square().inverse().sum();
}

Matrix select_columns(const Matrix& a, std::span<const Index> cols) {
    Matrix out(a.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c] < 0 || cols[c] >= a.cols()) {
            throw ValidationError("select_columns: column " + std::to_string(cols[c]) + " out of range");
        }
        out.col(static_cast<Index>(c)) = a.col(cols[c]);
    }
    return out;
}

}  // namespace descent
