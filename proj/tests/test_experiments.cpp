#include "descent/errors.hpp"
#include "descent/experiments.hpp"
#include "oracles.hpp"

#include <doctest.h>
#include <omp.h>

#include <numeric>
#include <set>

using namespace descent;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

RegressionDataset gaussian_data(std::mt19937_64& rng, Index n, Index k, const Vector& beta) {
    Matrix x = oracle::gaussian(rng, n, k);
    x.col(0).setOnes();
    return RegressionDataset(x, x * beta + 0.3 * oracle::gaussian(rng, n));
}

bool same_curve(const DescentCurve& a, const DescentCurve& b) {
    if (a.rows.size() != b.rows.size()) return false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        const auto &x = a.rows[i], &y = b.rows[i];
        if (x.complexity != y.complexity || x.in_rmse != y.in_rmse || x.out_rmse != y.out_rmse ||
            x.coef_norm != y.coef_norm || x.n_models != y.n_models)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("subset-mean RMSE") {
    const Vector truth = vec({1, 4, 2});
    SUBCASE("perfect predictions") {
        for (Index m = 1; m <= 3; ++m) CHECK(subset_mean_rmse(truth, truth, EvalPlan{m, 50, 1}) == 0.0);
    }
    SUBCASE("m = 1 is the plain RMSE over the full set") {
        const Vector pred = vec({0, 4, 4});
        CHECK(subset_mean_rmse(pred, truth, EvalPlan{1, 10, 1}) == doctest::Approx(std::sqrt(5.0 / 3.0)));
    }
    SUBCASE("m = eval size is the mean difference") {
        const Vector pred = vec({2, 6, 2});
        CHECK(subset_mean_rmse(pred, truth, EvalPlan{3, 7, 1}) == doctest::Approx(1.0));
    }
    SUBCASE("pairs against exhaustive enumeration") {
        const Vector pred = vec({2, 2, 5});
        const double exact = oracle::exhaustive_subset_rmse(pred, truth, 2);
        CHECK(subset_mean_rmse(pred, truth, EvalPlan{2, 200000, 3}) == doctest::Approx(exact).epsilon(0.01));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(subset_mean_rmse(truth, truth, EvalPlan{4, 10, 1}), ValidationError);
        CHECK_THROWS_AS(subset_mean_rmse(truth, truth, EvalPlan{0, 10, 1}), ValidationError);
        CHECK_THROWS_AS(subset_mean_rmse(truth, truth, EvalPlan{2, 0, 1}), ValidationError);
    }
}

TEST_CASE("orderings") {
    const auto plain = make_orderings(10, OrderingPlan{5, 3, false});
    CHECK(plain.size() == 5);
    const auto pinned = make_orderings(10, OrderingPlan{5, 3, true});
    for (const auto& o : pinned) {
        CHECK(o[0] == 0);
        std::set<Index> s(o.begin(), o.end());
        CHECK(s.size() == 10);
    }
    CHECK(make_orderings(10, OrderingPlan{5, 3, true}) == pinned);
}

TEST_CASE("least-squares descent curve") {
    std::mt19937_64 rng(1);
    const Index n = 12, k = 30;
    const Vector beta = oracle::gaussian(rng, k) / std::sqrt(static_cast<double>(k));
    const RegressionDataset train = gaussian_data(rng, n, k, beta);
    const RegressionDataset eval = gaussian_data(rng, 60, k, beta);
    std::vector<Index> grid(static_cast<std::size_t>(k));
    std::iota(grid.begin(), grid.end(), Index{1});
    const std::vector<EvalPlan> evals{{1, 1, 0}, {5, 200, 9}};
    const OrderingPlan orderings{4, 7, true};

    const OlsCurveResult serial = ols_descent_curve(train, eval, orderings, evals, grid, {}, Execution::Serial);
    omp_set_num_threads(4);
    const OlsCurveResult parallel = ols_descent_curve(train, eval, orderings, evals, grid, {}, Execution::Parallel);
    for (std::size_t e = 0; e < evals.size(); ++e) {
        CHECK(same_curve(serial.averaged[e], parallel.averaged[e]));
        for (std::size_t o = 0; o < 4; ++o) CHECK(same_curve(serial.per_ordering[e][o], parallel.per_ordering[e][o]));
    }

    const double scale = 1e-6 * (1 + std::sqrt(train.y.squaredNorm() / n));
    for (const DescentCurve& c : serial.per_ordering[0]) {
        CHECK_NOTHROW(c.validate());
        Index peak = 0;
        double peak_norm = -1;
        for (std::size_t g = 0; g < c.rows.size(); ++g) {
            const CurveRow& r = c.rows[g];
            if (g > 0) CHECK(r.in_rmse <= c.rows[g - 1].in_rmse + 1e-10);
            if (r.complexity >= n) CHECK(r.in_rmse <= scale);
            if (r.complexity > n) CHECK(*r.coef_norm <= *c.rows[g - 1].coef_norm + 1e-10);
            if (r.complexity >= n && *r.coef_norm > peak_norm) {
                peak_norm = *r.coef_norm;
                peak = r.complexity;
            }
        }
        // Only the interpolating side is ordered; below n the norm can exceed its value at n.
        CHECK(peak == n);
    }
    // m = 1 rows are the plain RMSE of the fitted model.
    const SubsetFit fit = fit_subset(train, FeatureSubset::prefix(serial.orderings[0], 5, k));
    const double direct = std::sqrt((eval.x * fit.beta - eval.y).squaredNorm() / 60.0);
    CHECK(serial.per_ordering[0][0].at(5).out_rmse.value() == doctest::Approx(direct).epsilon(1e-12));

    CHECK_THROWS_AS(ols_descent_curve(train, eval, orderings, evals, {k + 1}), ValidationError);
    CHECK_THROWS_AS(ols_descent_curve(train, eval, orderings, evals, {3, 2}), ValidationError);
}

TEST_CASE("rank failure is reported with the complexity") {
    Matrix x = Matrix::Ones(4, 3);
    const RegressionDataset d(x, Vector::Ones(4));
    try {
        ols_descent_curve(d, d, OrderingPlan{1, 1, false}, {EvalPlan{}}, {1, 2});
        FAIL("expected a rank error");
    } catch (const RankError& e) {
        CHECK(std::string(e.what()).find("complexity 2") != std::string::npos);
    }
}

TEST_CASE("donor combinations") {
    CHECK(binomial(12, 6) == 924);
    CHECK(binomial(5, 0) == 1);
    CHECK(binomial(3, 4) == 0);
    CHECK(binomial(200, 100) == UINT64_MAX);

    const std::vector<Index> pool{0, 1, 2, 3, 4};
    const auto all = donor_combinations(pool, 2, 100, 1);
    CHECK(all.size() == 10);
    CHECK(all.front() == std::vector<Index>{0, 1});
    CHECK(all.back() == std::vector<Index>{3, 4});

    std::vector<Index> big(30);
    std::iota(big.begin(), big.end(), Index{0});
    const auto sampled = donor_combinations(big, 10, 500, 4);
    CHECK(sampled.size() == 500);
    CHECK(std::set<std::vector<Index>>(sampled.begin(), sampled.end()).size() == 500);
    CHECK(std::is_sorted(sampled.begin(), sampled.end()));
    CHECK(donor_combinations(big, 10, 500, 4) == sampled);
    CHECK(donor_combinations(big, 10, 500, 5) != sampled);
}

TEST_CASE("synthetic-control descent curve") {
    std::mt19937_64 rng(2);
    Matrix y = oracle::gaussian(rng, 6, 6);
    y.row(0) = y.row(2);  // target equals donor 1 everywhere
    const Panel panel(y, 4, 2);
    const DonorSubset pool = DonorSubset::all(5);

    const ScCurveResult serial = sc_descent_curve(panel, pool, {1, 2, 5}, 10000, 3, {}, Execution::Serial);
    const ScCurveResult parallel = sc_descent_curve(panel, pool, {1, 2, 5}, 10000, 3, {}, Execution::Parallel);
    CHECK(same_curve(serial.curve, parallel.curve));
    CHECK(serial.curve.at(1).n_models == 5);
    CHECK(serial.curve.at(2).n_models == 10);
    CHECK(serial.curve.at(5).n_models == 1);

    const SynthFit full = fit_synth(panel, pool);
    CHECK(serial.curve.at(5).out_rmse.value() == full.out_rmse.value());
    CHECK(full.out_rmse.value() < 1e-6);
    CHECK(fit_synth(panel, DonorSubset({1, 3}, 5)).out_rmse.value() < 1e-6);

    CHECK_THROWS_AS(sc_descent_curve(panel, pool, {6}, 100, 1), ValidationError);

    const Panel no_post(y.leftCols(4), 4, 0);
    const ScCurveResult empty = sc_descent_curve(no_post, pool, {2}, 100, 1);
    CHECK_FALSE(empty.curve.rows[0].out_rmse.has_value());
    CHECK(empty.warnings.size() == 1);
}

TEST_CASE("portfolio bound") {
    SUBCASE("equal simple predictions") {
        const JensenCheck c = jensen_bound_check(1.0, vec({2, 2, 2}), 2.0, AveragingWeights{{0.2, 0.3, 0.5}});
        CHECK(c.pass);
        CHECK(c.slack == doctest::Approx(0.0));
    }
    SUBCASE("symmetric pair") {
        const JensenCheck c = jensen_bound_check(0.0, vec({-1, 1}), 0.0, AveragingWeights{{0.5, 0.5}});
        CHECK(c.pass);
        CHECK(c.slack == doctest::Approx(1.0));
    }
    SUBCASE("random instances") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 1000; ++trial) {
            const Index m = 1 + trial % 6;
            const Vector preds = oracle::gaussian(rng, m);
            Vector lam = oracle::gaussian(rng, m).cwiseAbs();
            lam /= lam.sum();
            const double y = oracle::gaussian(rng, 1)(0);
            const JensenCheck c = jensen_bound_check(y, preds, preds.dot(lam),
                                                     AveragingWeights{std::vector<double>(lam.data(), lam.data() + m)});
            CHECK(c.pass);
        }
    }
    SUBCASE("averaging precondition") {
        CHECK_THROWS_AS(jensen_bound_check(0.0, vec({-1, 1}), 0.5, AveragingWeights{{0.5, 0.5}}), ValidationError);
    }
}

TEST_CASE("permutation audit") {
    std::mt19937_64 rng(4);
    SUBCASE("single model") {
        ModelAverage m{AveragingWeights{{1.0}}, oracle::gaussian(rng, 10, 1)};
        const Vector t = oracle::gaussian(rng, 10);
        const PermutationReport r = permutation_audit(m, t, PermutationSpec::exhaustive());
        CHECK(r.mse_complex == r.mean_permuted);
        CHECK(r.mse_complex == doctest::Approx(r.mean_simple));
    }
    SUBCASE("identity permutation") {
        ModelAverage m{AveragingWeights{{0.2, 0.3, 0.5}}, oracle::gaussian(rng, 10, 3)};
        const Vector t = oracle::gaussian(rng, 10);
        const PermutationReport r = permutation_audit(m, t, PermutationSpec::explicit_list({{0, 1, 2}}));
        CHECK(r.mse_permuted[0] == r.mse_complex);
        CHECK_THROWS_AS(permutation_audit(m, t, PermutationSpec::explicit_list({{0, 0, 2}})), ValidationError);
    }
    SUBCASE("exhaustive mean against the enumeration oracle and the implication") {
        for (int trial = 0; trial < 200; ++trial) {
            const Index size = 1 + trial % 5;
            Vector lam = oracle::gaussian(rng, size).cwiseAbs();
            lam /= lam.sum();
            ModelAverage m{AveragingWeights{std::vector<double>(lam.data(), lam.data() + size)},
                           oracle::gaussian(rng, 15, size)};
            const Vector t = oracle::gaussian(rng, 15);
            const PermutationReport r = permutation_audit(m, t, PermutationSpec::exhaustive());
            CHECK(r.mean_permuted == doctest::Approx(oracle::exhaustive_permuted_mse(m.simple_predictions, t, lam)).epsilon(1e-12));
            if (r.premise_mean) CHECK(r.conclusion_slack >= -1e-12);
        }
    }
    SUBCASE("random permutations are seeded") {
        ModelAverage m{AveragingWeights{{0.25, 0.25, 0.5}}, oracle::gaussian(rng, 8, 3)};
        const Vector t = oracle::gaussian(rng, 8);
        const auto a = permutation_audit(m, t, PermutationSpec::uniform_random(10, 5));
        const auto b = permutation_audit(m, t, PermutationSpec::uniform_random(10, 5));
        CHECK(a.mse_permuted == b.mse_permuted);
        CHECK(a.mse_permuted.size() == 10);
    }
    CHECK(all_permutations(4).size() == 24);
}

TEST_CASE("curve validation") {
    DescentCurve c;
    c.rows.push_back({2, 0.1, 0.2, {}, 1});
    c.rows.push_back({2, 0.1, 0.2, {}, 1});
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.rows[1].complexity = 3;
    CHECK_NOTHROW(c.validate());
    c.rows[1].in_rmse = -1;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}
