#include "descent/errors.hpp"
#include "descent/interp_ols.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numeric>

using namespace descent;

namespace {

FeatureSubset all_columns(Index k) {
    std::vector<Index> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), Index{0});
    return FeatureSubset(idx, k);
}

RegressionDataset single_row() {
    Matrix x(1, 2);
    x << 1, 1;
    Vector y(1);
    y << 4;
    return RegressionDataset(x, y);
}

// Independent fit: closed form on the subset, scattered into k coordinates.
Vector oracle_fit(const Matrix& x, const Vector& y, const std::vector<Index>& cols) {
    Matrix xs(x.rows(), static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) xs.col(static_cast<Index>(j)) = x.col(cols[j]);
    const Vector b = xs.cols() > xs.rows() ? oracle::min_norm_closed_form(xs, y) : oracle::ols_normal_equations(xs, y);
    Vector out = Vector::Zero(x.cols());
    for (std::size_t j = 0; j < cols.size(); ++j) out(cols[j]) = b(static_cast<Index>(j));
    return out;
}

}  // namespace

TEST_CASE("fit_subset on a single observation") {
    const RegressionDataset d = single_row();
    const SubsetFit both = fit_subset(d, FeatureSubset({0, 1}, 2));
    CHECK(both.beta(0) == doctest::Approx(2.0));
    CHECK(both.beta(1) == doctest::Approx(2.0));
    CHECK(both.in_sample_rmse < 1e-12);

    const SubsetFit second = fit_subset(d, FeatureSubset({1}, 2));
    CHECK(second.beta(0) == 0.0);
    CHECK(second.beta(1) == doctest::Approx(4.0));
}

TEST_CASE("fit_subset matches OLS in the over-determined regime") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const RegressionDataset d(oracle::gaussian(rng, 8, 5), oracle::gaussian(rng, 8));
        const FeatureSubset j({4, 1, 2}, 5);
        const SubsetFit fit = fit_subset(d, j);
        CHECK((fit.beta - oracle_fit(d.x, d.y, j.indices())).norm() < 1e-10);
        CHECK(fit.beta(0) == 0.0);
        CHECK(fit.beta(3) == 0.0);
        CHECK(std::abs(fit.norm - fit.beta.norm()) < 1e-12);
        const double rmse = std::sqrt((d.y - d.x * fit.beta).squaredNorm() / 8.0);
        CHECK(fit.in_sample_rmse == doctest::Approx(rmse).epsilon(1e-12));
    }
}

TEST_CASE("in-sample fit is exact exactly when |J| >= n") {
    std::mt19937_64 rng(4);
    const RegressionDataset d(oracle::gaussian(rng, 5, 9), oracle::gaussian(rng, 5));
    for (Index l = 1; l <= 9; ++l) {
        std::vector<Index> idx(static_cast<std::size_t>(l));
        std::iota(idx.begin(), idx.end(), Index{0});
        const SubsetFit fit = fit_subset(d, FeatureSubset(idx, 9));
        const double scale = 1e-8 * (1 + d.y.norm() / std::sqrt(5.0));
        if (l >= 5) {
            CHECK(fit.in_sample_rmse <= scale);
        } else {
            CHECK(fit.in_sample_rmse > scale);
        }
    }
}

TEST_CASE("fit_subset rejects rank deficiency and bad subsets") {
    Matrix x(2, 3);
    x << 1, 2, 0, 2, 4, 0;
    const RegressionDataset d(x, Vector::Ones(2));
    CHECK_THROWS_AS(fit_subset(d, FeatureSubset({0, 1, 2}, 3)), RankError);
    CHECK_THROWS_AS(fit_subset(d, FeatureSubset({0, 1}, 3)), RankError);
    CHECK_THROWS_AS(FeatureSubset({}, 3), ValidationError);
    CHECK_THROWS_AS(FeatureSubset({0, 0}, 3), ValidationError);
    CHECK_THROWS_AS(FeatureSubset({3}, 3), ValidationError);
    CHECK_THROWS_AS(RegressionDataset(Matrix::Ones(2, 2), Vector::Ones(3)), ValidationError);
}

TEST_CASE("averaging weights: worked examples") {
    SUBCASE("equal leverages") {
        const RegressionDataset d = single_row();
        const AveragingDecomposition dec = averaging_decomposition(d, FeatureSubset({0, 1}, 2));
        CHECK(dec.lambda.weights[0] == doctest::Approx(0.5));
        CHECK(dec.lambda.weights[1] == doctest::Approx(0.5));
        CHECK(dec.loo[0].beta(1) == doctest::Approx(4.0));
        CHECK(dec.loo[1].beta(0) == doctest::Approx(4.0));
        CHECK(dec.residual < 1e-12);
    }
    SUBCASE("a column with leverage one gets weight zero") {
        Matrix x(1, 3);
        x << 1, 0, 0;
        Vector y(1);
        y << 2;
        const RegressionDataset d(x, y);
        const AveragingWeights w = averaging_weights(d, all_columns(3));
        CHECK(w.weights[0] == 0.0);
        CHECK(w.weights[1] == doctest::Approx(0.5));
        CHECK(w.weights[2] == doctest::Approx(0.5));
        const AveragingDecomposition dec = averaging_decomposition(d, all_columns(3));
        CHECK(dec.residual < 1e-12);
    }
    SUBCASE("undefined without interpolation") {
        std::mt19937_64 rng(1);
        const RegressionDataset d(oracle::gaussian(rng, 3, 3), oracle::gaussian(rng, 3));
        CHECK_THROWS_AS(averaging_weights(d, all_columns(3)), ValidationError);
    }
}

TEST_CASE("averaging identity on random 3x8 designs against oracle fits") {
    std::mt19937_64 rng(21);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const RegressionDataset d(oracle::gaussian(rng, 3, 8), oracle::gaussian(rng, 3));
        const FeatureSubset j = all_columns(8);
        const AveragingDecomposition dec = averaging_decomposition(d, j);

        const Vector h = oracle::leverages(d.x);
        Vector combo = Vector::Zero(8);
        for (Index c = 0; c < 8; ++c) {
            const double lam = (1 - h(c)) / (8 - 3);
            CHECK(dec.lambda.weights[static_cast<std::size_t>(c)] == doctest::Approx(lam).epsilon(1e-9));
            combo += lam * oracle_fit(d.x, d.y, j.without(c).indices());
        }
        const Vector full = oracle_fit(d.x, d.y, j.indices());
        CHECK((dec.full.beta - full).norm() < 1e-9 * (1 + full.norm()));
        CHECK((combo - full).norm() < 1e-8 * (1 + full.norm()));
        worst = std::max(worst, dec.residual / (1 + dec.full.norm));
        CHECK(std::abs(dec.lambda.sum() - 1.0) < 1e-10);
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("rank-one leave-one-out update agrees with refitting") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 1 + trial % 4;
        const Index k = n + 1 + trial % 5;
        const RegressionDataset d(oracle::gaussian(rng, n, k), oracle::gaussian(rng, n));
        const auto slow = leave_one_out_fits(d, all_columns(k), {}, LooMethod::Recompute);
        const auto fast = leave_one_out_fits(d, all_columns(k), {}, LooMethod::ShermanMorrison);
        REQUIRE(slow.size() == fast.size());
        for (std::size_t j = 0; j < slow.size(); ++j) {
            CHECK((slow[j].beta - fast[j].beta).norm() < 1e-8 * (1 + slow[j].norm));
            CHECK(fast[j].beta(static_cast<Index>(j)) == 0.0);
        }
    }
    SUBCASE("degenerate leverage") {
        Matrix x(1, 3);
        x << 1, 0, 0;
        const RegressionDataset d(x, Vector::Ones(1));
        const auto fast = leave_one_out_fits(d, all_columns(3), {}, LooMethod::ShermanMorrison);
        const auto slow = leave_one_out_fits(d, all_columns(3), {}, LooMethod::Recompute);
        for (std::size_t j = 0; j < 3; ++j) CHECK((slow[j].beta - fast[j].beta).norm() < 1e-12);
    }
}

TEST_CASE("AveragingWeights validation") {
    CHECK_NOTHROW((AveragingWeights{{0.25, 0.75}}.validate()));
    CHECK_THROWS_AS((AveragingWeights{{0.5, 0.6}}.validate()), NumericalError);
    CHECK_THROWS_AS((AveragingWeights{{-0.1, 1.1}}.validate()), NumericalError);
}

TEST_CASE("variation distance") {
    const FeatureSubset j({0, 1}, 2);
    SubsetFit a{Vector::Zero(2), j, 0, 0}, b = a;
    CHECK(variation_distance(a, b, Euclidean{}) == 0.0);
    a.beta << 1, 0;
    b.beta << 0, 1;
    CHECK(variation_distance(a, b, Euclidean{}) == doctest::Approx(std::sqrt(2.0)));
    Matrix x(1, 2);
    x << 1, 2;
    CHECK(variation_distance(a, b, DesignWeighted{&x}) == doctest::Approx(1.0));
    SubsetFit c{Vector::Zero(3), FeatureSubset({0}, 3), 0, 0};
    CHECK_THROWS_AS(variation_distance(a, c, Euclidean{}), ValidationError);
}

TEST_CASE("variation hierarchy on random instances") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        // Non-interpolating branch, design-weighted metric.
        {
            const Index n = 6, k = 2 + trial % 4;
            const Matrix x = oracle::gaussian(rng, n, k);
            const RegressionDataset a(x, oracle::gaussian(rng, n)), b(x, oracle::gaussian(rng, n));
            const FeatureSubset j = all_columns(k);
            const double full = variation_distance(fit_subset(a, j), fit_subset(b, j), DesignWeighted{&x});
            for (Index c = 0; c < k; ++c) {
                const double sub =
                    variation_distance(fit_subset(a, j.without(c)), fit_subset(b, j.without(c)), DesignWeighted{&x});
                CHECK(full >= sub - 1e-9);
            }
        }
        // Interpolating branch, Euclidean metric.
        {
            const Index n = 2 + trial % 3, k = n + 1 + trial % 4;
            const Matrix x = oracle::gaussian(rng, n, k);
            const RegressionDataset a(x, oracle::gaussian(rng, n)), b(x, oracle::gaussian(rng, n));
            const FeatureSubset j = all_columns(k);
            const double full = variation_distance(fit_subset(a, j), fit_subset(b, j), Euclidean{});
            for (Index c = 0; c < k; ++c) {
                const double sub = variation_distance(fit_subset(a, j.without(c)), fit_subset(b, j.without(c)), Euclidean{});
                CHECK(full <= sub + 1e-9);
            }
        }
    }
}

TEST_CASE("trace variance of the interpolator") {
    SUBCASE("closed forms") {
        Matrix x(1, 2);
        x << 1, 1;
        CHECK(trace_variance_interpolating(x, FeatureSubset({0, 1}, 2), 1.0) == doctest::Approx(0.5));
        Matrix x2(2, 3);
        x2 << 2, 0, 0, 0, 2, 0;
        CHECK(trace_variance_interpolating(x2, all_columns(3), 1.0) == doctest::Approx(0.5));
        CHECK(trace_variance_interpolating(x2, all_columns(3), 3.0) == doctest::Approx(1.5));
    }
    SUBCASE("not defined without interpolation") {
        CHECK_THROWS_AS(trace_variance_interpolating(Matrix::Identity(2, 2), all_columns(2), 1.0), ValidationError);
    }
    SUBCASE("dropping a column never reduces the trace") {
        std::mt19937_64 rng(41);
        for (int trial = 0; trial < 300; ++trial) {
            const Index n = 1 + trial % 5, k = n + 1 + trial % 6;
            const Matrix x = oracle::gaussian(rng, n, k);
            const FeatureSubset j = all_columns(k);
            const double full = trace_variance_interpolating(x, j, 1.0);
            CHECK(full == doctest::Approx(oracle::gauss_inverse(x * x.transpose()).trace()).epsilon(1e-9));
            for (Index c = 0; c < k; ++c) {
                const std::vector<Index> keep = j.without(c).indices();
                Matrix xs(n, k - 1);
                for (std::size_t q = 0; q < keep.size(); ++q) xs.col(static_cast<Index>(q)) = x.col(keep[q]);
                CHECK(full <= oracle::gauss_inverse(xs * xs.transpose()).trace() + 1e-9);
            }
        }
    }
    SUBCASE("Monte Carlo agreement") {
        std::mt19937_64 rng(43);
        const Matrix x = oracle::gaussian(rng, 3, 6);
        const Vector beta = oracle::gaussian(rng, 6);
        const double exact = trace_variance_interpolating(x, all_columns(6), 2.0);
        const double mc = monte_carlo_trace_variance(x, all_columns(6), beta, 2.0, 100000, 99);
        CHECK(std::abs(mc - exact) / exact < 0.02);
    }
}

TEST_CASE("coefficient norm") {
    SubsetFit f{Vector::Zero(2), FeatureSubset({0, 1}, 2), 0, 0};
    CHECK(coefficient_norm(f) == 0.0);
    f.beta << 3, 4;
    CHECK(coefficient_norm(f) == doctest::Approx(5.0));
}

TEST_CASE("norm shrinks as interpolating subsets grow") {
    std::mt19937_64 rng(51);
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 3, k = 10;
        const RegressionDataset d(oracle::gaussian(rng, n, k), oracle::gaussian(rng, n));
        double prev = std::numeric_limits<double>::infinity();
        for (Index l = n; l <= k; ++l) {
            std::vector<Index> idx(static_cast<std::size_t>(l));
            std::iota(idx.begin(), idx.end(), Index{0});
            const double norm = coefficient_norm(fit_subset(d, FeatureSubset(idx, k)));
            CHECK(norm <= prev + 1e-10);
            prev = norm;
        }
    }
}
