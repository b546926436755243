#include "descent/simplex_qp.hpp"

#include "descent/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace descent {

Vector project_to_simplex(const Vector& v) {
    const Index m = v.size();
    if (m == 0) throw ValidationError("project_to_simplex: empty vector");
    std::vector<double> u(v.data(), v.data() + m);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (Index j = 0; j < m; ++j) {
        cumsum += u[static_cast<std::size_t>(j)];
        const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (u[static_cast<std::size_t>(j)] - candidate > 0.0) theta = candidate;
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

double simplex_qp_objective(const Matrix& a, const Vector& y, double eta, const Vector& w) {
    return (a * w - y).squaredNorm() + eta * w.squaredNorm();
}

double simplex_qp_gap_tolerance(const Vector& y, double opt_tol) {
    return opt_tol * (1.0 + y.squaredNorm());
}

namespace {

Vector gradient(const Matrix& a, const Vector& y, double eta, const Vector& w) {
    return 2.0 * (a.transpose() * (a * w - y) + eta * w);
}

double fw_gap(const Vector& g, const Vector& w) { return g.dot(w) - g.minCoeff(); }

// Orthonormal basis (s x (s-1)) of the complement of the all-ones vector:
// the trailing columns of the Householder reflector that maps e_1 to 1/sqrt(s).
Matrix sum_zero_basis(Index s) {
    Vector v = Vector::Constant(s, 1.0 / std::sqrt(static_cast<double>(s)));
    v(0) -= 1.0;
    Matrix h = Matrix::Identity(s, s) - (2.0 / v.squaredNorm()) * v * v.transpose();
    return h.rightCols(s - 1);
}

void renormalize(Vector& w) {
    w = w.cwiseMax(0.0);
    const double total = w.sum();
    if (total > 0.0) w /= total;
}

Vector accelerated_projected_gradient(const Matrix& a, const Vector& y, double eta, Vector x,
                                      double lipschitz, int iterations, double gap_tol) {
    Vector z = x;
    double t = 1.0;
    double fx = simplex_qp_objective(a, y, eta, x);
    for (int it = 0; it < iterations; ++it) {
        Vector next = project_to_simplex(z - gradient(a, y, eta, z) / lipschitz);
        const double fnext = simplex_qp_objective(a, y, eta, next);
        if (fnext > fx) {
            // Momentum overshoot: restart from the last iterate.
            t = 1.0;
            z = x;
            continue;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = next + ((t - 1.0) / t_next) * (next - x);
        x = std::move(next);
        fx = fnext;
        t = t_next;
        if (it % 10 == 9 && fw_gap(gradient(a, y, eta, x), x) <= gap_tol) break;
    }
    return x;
}

}  // namespace

QpResult solve_simplex_qp(const Matrix& a, const Vector& y, double eta, const QpOptions& options,
                          const std::optional<Vector>& warm_start) {
    require_finite(a, "simplex QP design");
    require_finite(y, "simplex QP target");
    if (a.rows() != y.size()) {
        throw ValidationError("simplex QP: design has " + std::to_string(a.rows()) +
                              " rows but target has length " + std::to_string(y.size()));
    }
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw ValidationError("simplex QP: eta must be >= 0");
    if (!(options.opt_tol > 0.0)) throw ValidationError("simplex QP: opt_tol must be positive");
    if (options.max_iter < 1) throw ValidationError("simplex QP: max_iter must be positive");

    const Index m = a.cols();
    const double gap_tol = simplex_qp_gap_tolerance(y, options.opt_tol);
    QpResult result;

    if (m == 1) {
        result.w = Vector::Ones(1);
        result.objective = simplex_qp_objective(a, y, eta, result.w);
        return result;
    }

    Vector w;
    if (warm_start && warm_start->size() == m && warm_start->allFinite()) {
        w = project_to_simplex(*warm_start);
    } else {
        w = Vector::Constant(m, 1.0 / static_cast<double>(m));
    }

    const double lipschitz =
        2.0 * (Eigen::SelfAdjointEigenSolver<Matrix>(a.transpose() * a, Eigen::EigenvaluesOnly)
                   .eigenvalues()
                   .maxCoeff() +
               eta);
    if (lipschitz > 0.0 && options.pg_iter > 0) {
        w = accelerated_projected_gradient(a, y, eta, w, lipschitz, options.pg_iter, gap_tol);
    }

    std::vector<Index> support;
    for (Index i = 0; i < m; ++i) {
        if (w(i) > 0.0) support.push_back(i);
    }

    const double sqrt_eta = std::sqrt(eta);
    Index just_added = -1;
    int iter = 0;
    for (; iter < options.max_iter; ++iter) {
        const Index s = static_cast<Index>(support.size());
        Vector step = Vector::Zero(s);
        if (s > 1) {
            const Matrix z = sum_zero_basis(s);
            const Matrix as = select_columns(a, support);
            Vector ws(s);
            for (Index p = 0; p < s; ++p) ws(p) = w(support[static_cast<std::size_t>(p)]);
            Matrix b(a.rows() + s, s - 1);
            b.topRows(a.rows()) = as * z;
            b.bottomRows(s) = sqrt_eta * z;
            Vector r(a.rows() + s);
            r.head(a.rows()) = y - as * ws;
            r.tail(s) = -sqrt_eta * ws;
            step = z * min_norm_least_squares(b, r);
        }

        double alpha = 1.0;
        Index blocking = -1;
        for (Index p = 0; p < s; ++p) {
            if (step(p) < 0.0) {
                const double ratio = w(support[static_cast<std::size_t>(p)]) / -step(p);
                if (ratio < alpha) {
                    alpha = ratio;
                    blocking = p;
                }
            }
        }
        for (Index p = 0; p < s; ++p) w(support[static_cast<std::size_t>(p)]) += alpha * step(p);

        if (blocking >= 0) {
            const Index dropped = support[static_cast<std::size_t>(blocking)];
            if (dropped == just_added && alpha == 0.0) break;  // no progress possible on this face
            w(dropped) = 0.0;
            std::erase_if(support, [&](Index i) { return w(i) <= 0.0; });
            for (Index i = 0; i < m; ++i) {
                if (w(i) < 0.0) w(i) = 0.0;
            }
            just_added = -1;
            continue;
        }

        const Vector g = gradient(a, y, eta, w);
        double mu = 0.0;
        for (Index i : support) mu += g(i);
        mu /= static_cast<double>(s);
        // Enter on any multiplier violation above rounding level; a looser
        // threshold would leave weak-curvature (small eta) solutions inexact.
        const double enter_tol = 1e-12 * (1.0 + g.cwiseAbs().maxCoeff());
        Index entering = -1;
        double best = mu - enter_tol;
        for (Index i = 0; i < m; ++i) {
            if (w(i) == 0.0 && g(i) < best) {
                best = g(i);
                entering = i;
            }
        }
        if (entering < 0) break;
        support.insert(std::lower_bound(support.begin(), support.end(), entering), entering);
        just_added = entering;
    }

    renormalize(w);
    result.w = w;
    result.objective = simplex_qp_objective(a, y, eta, w);
    result.gap = fw_gap(gradient(a, y, eta, w), w);
    result.iterations = iter;
    if (result.gap > gap_tol) {
        throw NumericalError("simplex QP did not converge within " + std::to_string(options.max_iter) +
                             " iterations: duality gap " + std::to_string(result.gap) + " > " +
                             std::to_string(gap_tol));
    }
    return result;
}

}  // namespace descent
