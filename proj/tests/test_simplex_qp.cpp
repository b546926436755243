#include "descent/errors.hpp"
#include "descent/simplex_qp.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace descent;

TEST_CASE("simplex projection") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const Index m = 1 + trial % 6;
        const Vector v = 2.0 * oracle::gaussian(rng, m);
        const Vector p = project_to_simplex(v);
        CHECK(p.minCoeff() >= 0.0);
        CHECK(std::abs(p.sum() - 1.0) < 1e-12);
        if (m <= 4) {
            // Projection is the QP with A = I and target v.
            Vector best;
            oracle::face_enumeration_optimum(Matrix::Identity(m, m), v, 0.0, &best);
            CHECK((p - best).norm() < 1e-10);
        }
    }
    Vector inside(3);
    inside << 0.2, 0.3, 0.5;
    CHECK((project_to_simplex(inside) - inside).norm() < 1e-15);
}

TEST_CASE("QP optimum against brute-force grid with face polish") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 300; ++trial) {
        const Index m = 1 + trial % 3, t = 1 + (trial / 3) % 3;
        const Matrix a = oracle::gaussian(rng, t, m);
        const Vector y = oracle::gaussian(rng, t);
        const double eta = trial % 2 ? 0.0 : 0.1;
        const QpResult r = solve_simplex_qp(a, y, eta, QpOptions{});
        CHECK(r.w.minCoeff() >= 0.0);
        CHECK(std::abs(r.w.sum() - 1.0) < 1e-12);
        CHECK(r.objective <= oracle::polished_simplex_optimum(a, y, eta) + 1e-8);
        CHECK(r.gap <= simplex_qp_gap_tolerance(y, 1e-8));
    }
}

TEST_CASE("QP optimum against exact face enumeration for larger supports") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const Index m = 2 + trial % 6, t = 1 + (trial / 6) % 5;
        Matrix a = oracle::gaussian(rng, t, m);
        if (trial % 5 == 0) a.col(1) = a.col(0);
        const Vector y = oracle::gaussian(rng, t);
        const double eta = trial % 3 == 0 ? 1e-6 : 0.0;
        const QpResult r = solve_simplex_qp(a, y, eta, QpOptions{});
        CHECK(std::abs(r.objective - simplex_qp_objective(a, y, eta, r.w)) < 1e-12);
        CHECK(r.objective <= oracle::face_enumeration_optimum(a, y, eta) + 1e-10);
    }
}

TEST_CASE("vertex and point cases are exact") {
    Matrix a(3, 3);
    a << 1, 5, 2, 0, 3, 7, 4, 1, 1;
    const Vector y = a.col(1);
    const QpResult r = solve_simplex_qp(a, y, 0.0, QpOptions{});
    CHECK(r.w(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.objective < 1e-20);

    const QpResult single = solve_simplex_qp(Matrix::Constant(2, 1, 3.0), Vector::Zero(2), 0.0, QpOptions{});
    CHECK(single.w(0) == 1.0);
}

TEST_CASE("warm start reaches the same optimum") {
    std::mt19937_64 rng(4);
    const Matrix a = oracle::gaussian(rng, 3, 5);
    const Vector y = oracle::gaussian(rng, 3);
    const QpResult cold = solve_simplex_qp(a, y, 1e-3, QpOptions{});
    const QpResult warm = solve_simplex_qp(a, y, 1e-3, QpOptions{}, Vector::Constant(5, 0.2));
    CHECK((cold.w - warm.w).norm() < 1e-8);
}

TEST_CASE("input checks") {
    CHECK_THROWS_AS(solve_simplex_qp(Matrix::Ones(2, 2), Vector::Ones(3), 0.0, QpOptions{}), ValidationError);
    CHECK_THROWS_AS(solve_simplex_qp(Matrix::Ones(2, 2), Vector::Ones(2), -1.0, QpOptions{}), ValidationError);
}
