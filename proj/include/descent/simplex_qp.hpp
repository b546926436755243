#pragma once

// Convex quadratic programs over the probability simplex:
//
//     minimize ||A w - y||^2 + eta ||w||^2   subject to  w >= 0, sum(w) = 1.
//
// Accelerated projected gradient gets close and identifies a support; a
// primal active-set phase then solves the equality-constrained problem on
// each face exactly (minimum-norm steps via SVD, so singular A'A is fine)
// and adds coordinates by their multipliers. The Frank-Wolfe gap
// g'w - min_i g_i bounds the objective suboptimality and is the certificate.

#include "descent/numcore.hpp"

#include <optional>

namespace descent {

struct QpOptions {
    double opt_tol = 1e-8;  // certificate: gap <= opt_tol * (1 + ||y||^2)
    int max_iter = 1000;    // active-set iterations
    int pg_iter = 300;      // projected-gradient warm-up iterations
};

struct QpResult {
    Vector w;
    double objective = 0.0;
    double gap = 0.0;  // Frank-Wolfe duality gap at w
    int iterations = 0;
};

// Euclidean projection onto the probability simplex (sort-based, exact).
Vector project_to_simplex(const Vector& v);

double simplex_qp_objective(const Matrix& a, const Vector& y, double eta, const Vector& w);

// Gap tolerance the solver certifies against for this instance.
double simplex_qp_gap_tolerance(const Vector& y, double opt_tol);

// Throws NumericalError (with the achieved gap) when the certificate is not
// met within the iteration budget.
QpResult solve_simplex_qp(const Matrix& a, const Vector& y, double eta, const QpOptions& options,
                          const std::optional<Vector>& warm_start = std::nullopt);

}  // namespace descent
