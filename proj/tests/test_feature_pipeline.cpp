#include "descent/errors.hpp"
#include "descent/feature_pipeline.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace descent;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// Lower inverse empirical CDF at b / B, for b = 1 .. B-1.
std::vector<double> quantile_edges(Vector x, int bins) {
    std::sort(x.data(), x.data() + x.size());
    std::vector<double> edges;
    const Index n = x.size();
    for (int b = 1; b < bins; ++b) {
        const Index pos = static_cast<Index>(std::ceil(static_cast<double>(n) * b / bins)) - 1;
        edges.push_back(x(pos));
    }
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    while (!edges.empty() && edges.back() >= x(n - 1)) edges.pop_back();
    return edges;
}

}  // namespace

TEST_CASE("quantile binning") {
    SUBCASE("median split") {
        const BinResult r = quantile_bin(vec({1, 2, 3, 4}), 2);
        REQUIRE(r.indicators.cols() == 2);
        CHECK(r.indicators.col(0) == vec({1, 1, 0, 0}));
        CHECK(r.indicators.col(1) == vec({0, 0, 1, 1}));
    }
    SUBCASE("constant column") {
        const BinResult r = quantile_bin(Vector::Constant(10, 3.0), 50);
        CHECK(r.degenerate);
        REQUIRE(r.indicators.cols() == 1);
        CHECK(r.indicators.col(0) == Vector::Ones(10));
    }
    SUBCASE("partition and edges on random columns") {
        std::mt19937_64 rng(1);
        for (int trial = 0; trial < 100; ++trial) {
            const Index n = 5 + trial;
            Vector x = oracle::gaussian(rng, n);
            if (trial % 3 == 0) x.head(n / 2).setZero();  // point mass, like zero incomes
            if (trial % 3 == 1) x = x.array().round();
            const int bins = 2 + trial % 10;
            const BinResult r = quantile_bin(x, bins);
            CHECK(r.upper_edges == quantile_edges(x, bins));
            CHECK(r.indicators.rowwise().sum() == Vector::Ones(n));
            for (Index i = 0; i < n; ++i) {
                Index b = 0;
                r.indicators.row(i).maxCoeff(&b);
                if (b > 0) CHECK(x(i) > r.upper_edges[static_cast<std::size_t>(b - 1)]);
                if (b < static_cast<Index>(r.upper_edges.size())) CHECK(x(i) <= r.upper_edges[static_cast<std::size_t>(b)]);
            }
            CHECK(apply_bins(x, r.upper_edges) == r.indicators);
        }
    }
    SUBCASE("validation") { CHECK_THROWS_AS(quantile_bin(vec({1, 2}), 1), ValidationError); }
}

TEST_CASE("interactions") {
    SUBCASE("distinct groups") {
        Matrix d(3, 2);
        d << 1, 1, 1, 0, 0, 1;
        const InteractionExpansion e = expand_interactions(d, {{"a", "a"}, {"b", "b"}});
        CHECK(e.names == std::vector<std::string>{"a", "b", "a:b"});
        CHECK(e.x.col(2) == vec({1, 0, 0}));
    }
    SUBCASE("same group") {
        Matrix d(2, 2);
        d << 1, 0, 0, 1;
        const InteractionExpansion e = expand_interactions(d, {{"a", "g"}, {"b", "g"}});
        CHECK(e.names == std::vector<std::string>{"a", "b"});
    }
    SUBCASE("all-zero product dropped") {
        Matrix d(2, 2);
        d << 1, 0, 0, 1;
        const InteractionExpansion e = expand_interactions(d, {{"a", "a"}, {"b", "b"}});
        CHECK(e.names == std::vector<std::string>{"a", "b"});
        CHECK(e.dropped == 1);
    }
    SUBCASE("pruning is sound") {
        std::mt19937_64 rng(2);
        std::bernoulli_distribution coin(0.2);
        Matrix d(6, 5);
        for (Index r = 0; r < 6; ++r)
            for (Index c = 0; c < 5; ++c) d(r, c) = coin(rng);
        std::vector<DummyColumn> cols;
        for (int c = 0; c < 5; ++c) cols.push_back({"d" + std::to_string(c), c < 2 ? "g" : "d" + std::to_string(c)});
        const InteractionExpansion e = expand_interactions(d, cols);
        for (Index c = 0; c < e.x.cols(); ++c) CHECK(e.x.col(c).cwiseAbs().sum() > 0);
        Index nonzero = 0;
        for (Index a = 0; a < 5; ++a) {
            nonzero += d.col(a).sum() > 0;
            for (Index b = a + 1; b < 5; ++b) {
                if (cols[static_cast<std::size_t>(a)].group == cols[static_cast<std::size_t>(b)].group) continue;
                nonzero += d.col(a).cwiseProduct(d.col(b)).sum() > 0;
            }
        }
        CHECK(e.x.cols() == nonzero);
    }
    SUBCASE("non-binary input") {
        Matrix d(1, 1);
        d << 2;
        CHECK_THROWS_AS(expand_interactions(d, {{"a", "a"}}), ValidationError);
    }
}

TEST_CASE("full expansion") {
    ExpansionPlan plan;
    plan.bins_per_continuous = 2;
    plan.jitter_sd = 0.0;
    plan.interactions = false;

    SUBCASE("toy continuous column") {
        Matrix raw(4, 1);
        raw << 1, 2, 3, 4;
        const FeatureExpansion fx = FeatureExpansion::fit(raw, {"age"}, {{"age", ColumnKind::Continuous, {}}}, plan);
        CHECK(fx.names() == std::vector<std::string>{"intercept", "age_bin1", "age_bin2"});
        Matrix expect(4, 3);
        expect << 1, 1, 0, 1, 1, 0, 1, 0, 1, 1, 0, 1;
        CHECK(fx.transform_full(raw, 0) == expect);
        CHECK(fx.provenance().size() == 3);
    }
    SUBCASE("discrete levels and dummies with interactions") {
        Matrix raw(4, 3);
        raw << 1, 0, 9, 2, 1, 9, 3, 1, 9, 1, 0, 9;
        plan.interactions = true;
        const FeatureExpansion fx = FeatureExpansion::fit(
            raw, {"grade", "union", "unused"},
            {{"grade", ColumnKind::Discrete, {}}, {"union", ColumnKind::Dummy, {}}}, plan);
        const auto names = fx.names();
        CHECK(std::count(names.begin(), names.end(), "grade=1") == 1);
        CHECK(std::count(names.begin(), names.end(), "union") == 1);
        // Levels of one discrete column share a group and are never interacted.
        for (const auto& n : names) CHECK(n.find("grade=1:grade=") == std::string::npos);
        CHECK(std::count(names.begin(), names.end(), "grade=2:union") == 1);
        CHECK(std::count(names.begin(), names.end(), "grade=1:union") == 0);  // zero on every row
    }
    SUBCASE("unknown column is named in the error") {
        Matrix raw(2, 1);
        raw << 1, 2;
        try {
            FeatureExpansion::fit(raw, {"age"}, {{"wage", ColumnKind::Continuous, {}}}, plan);
            FAIL("expected an error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("wage") != std::string::npos);
        }
    }
    SUBCASE("determinism") {
        std::mt19937_64 rng(3);
        const Matrix raw = oracle::gaussian(rng, 30, 2);
        plan.jitter_sd = 0.02;
        plan.jitter_seed = 5;
        plan.bins_per_continuous = 5;
        const std::vector<ColumnSpec> specs{{"a", ColumnKind::Continuous, {}}, {"b", ColumnKind::Continuous, {}}};
        const FeatureExpansion f1 = FeatureExpansion::fit(raw, {"a", "b"}, specs, plan);
        const FeatureExpansion f2 = FeatureExpansion::fit(raw, {"a", "b"}, specs, plan);
        CHECK(f1.names() == f2.names());
        CHECK(f1.transform_full(raw, 0) == f2.transform_full(raw, 0));
        CHECK(f1.transform_full(raw, 0) != f1.transform_full(raw, 1));
        // The intercept is never jittered.
        CHECK(f1.transform_full(raw, 0).col(0) == Vector::Ones(30));
    }
}

TEST_CASE("jitter") {
    std::mt19937_64 rng(4);
    const Matrix x = oracle::gaussian(rng, 5, 4);
    CHECK(jitter(x, 0.0, 1) == x);
    CHECK(jitter(x, 0.02, 1) == jitter(x, 0.02, 1));
    CHECK(jitter(x, 0.02, 1) != jitter(x, 0.02, 2));
    CHECK(jitter(x, 0.02, 1, 0) != jitter(x, 0.02, 1, 1));

    const Matrix zeros = Matrix::Zero(1000, 1000);
    const Matrix noise = jitter(zeros, 0.02, 77);
    CHECK(std::abs(noise.mean()) < 3 * 0.02 / 1e3);
    const double sd = std::sqrt(noise.array().square().mean());
    CHECK(sd == doctest::Approx(0.02).epsilon(0.01));
}

TEST_CASE("random orderings") {
    CHECK(random_ordering(1, 9) == std::vector<Index>{0});
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Index k = 1 + static_cast<Index>(rng() % 100);
        auto p = random_ordering(k, rng());
        std::sort(p.begin(), p.end());
        for (Index i = 0; i < k; ++i) CHECK(p[static_cast<std::size_t>(i)] == i);
    }
    CHECK(random_ordering(20, 1) != random_ordering(20, 2));
    CHECK(random_ordering(20, 1) == random_ordering(20, 1));
}

TEST_CASE("plan validation") {
    ExpansionPlan p;
    p.bins_per_continuous = 1;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = ExpansionPlan{};
    p.jitter_sd = -1;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    CHECK_THROWS_AS(parse_column_kind("ordinal"), ValidationError);
    CHECK(parse_column_kind("dummy") == ColumnKind::Dummy);
}
