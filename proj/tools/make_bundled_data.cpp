// Regenerates the synthetic datasets under data/. Usage: make-bundled-data [out_dir]

#include "descent/csv.hpp"
#include "descent/rng.hpp"

#include <cmath>
#include <iostream>
#include <random>

using namespace descent;

namespace {

constexpr std::uint64_t kSeed = 20240611;

// Intercept plus 119 standard Gaussian regressors; dense coefficients with unit
// signal variance and noise sd 0.5.
void regression_data(const std::filesystem::path& dir) {
    constexpr Index k = 120, n_train = 40, n_eval = 200;
    auto rng = make_rng(kSeed, RngPurpose::MonteCarlo, 1);
    std::normal_distribution<double> z(0.0, 1.0);
    Vector beta(k);
    beta(0) = 1.0;
    for (Index j = 1; j < k; ++j) beta(j) = z(rng) / std::sqrt(static_cast<double>(k - 1));

    std::vector<std::string> names{"intercept"};
    for (Index j = 1; j < k; ++j) names.push_back("x" + std::to_string(j));

    auto draw = [&](Index rows) {
        Matrix x(rows, k);
        for (Index r = 0; r < rows; ++r) {
            x(r, 0) = 1.0;
            for (Index j = 1; j < k; ++j) x(r, j) = z(rng);
        }
        Vector y = x * beta;
        for (Index r = 0; r < rows; ++r) y(r) += 0.5 * z(rng);
        return RegressionDataset(std::move(x), std::move(y), names);
    };
    write_tabular(dir / "ols_train.csv", draw(n_train), "y");
    write_tabular(dir / "ols_eval.csv", draw(n_eval), "y");
}

// Raw covariates in the style of an earnings survey, for the expansion example.
void raw_data(const std::filesystem::path& dir) {
    auto rng = make_rng(kSeed, RngPurpose::MonteCarlo, 2);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_int_distribution<int> age(18, 55), educ(6, 16);
    std::bernoulli_distribution coin(0.3);
    auto table = [&](int rows) {
        CsvTable t;
        t.header = {"age", "educ", "black", "hisp", "married", "nodegree", "re74", "re78"};
        for (int r = 0; r < rows; ++r) {
            const int a = age(rng), e = educ(rng);
            const int black = coin(rng), hisp = black ? 0 : coin(rng);
            const int married = coin(rng), nodegree = e < 12 ? 1 : 0;
            const double re74 = std::max(0.0, 4000.0 + 300.0 * (e - 10) + 3000.0 * z(rng));
            const double re78 = std::max(0.0, 0.6 * re74 + 150.0 * (a - 18) + 400.0 * (e - 10) - 800.0 * black +
                                                  1000.0 * married + 2500.0 * z(rng));
            t.rows.push_back({std::to_string(a), std::to_string(e), std::to_string(black), std::to_string(hisp),
                              std::to_string(married), std::to_string(nodegree), format_double(std::round(re74)),
                              format_double(std::round(re78))});
        }
        return t;
    };
    write_csv(dir / "raw_train.csv", table(60));
    write_csv(dir / "raw_eval.csv", table(200));
}

// Two-factor panel: twelve donors and a target whose loadings sit inside the
// donors' loading hull. Three pre periods and two post periods, long format.
void panel_data(const std::filesystem::path& dir) {
    constexpr int donors = 12, periods = 5;
    auto rng = make_rng(kSeed, RngPurpose::MonteCarlo, 3);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.5, 1.5);

    Matrix load(donors + 1, 2);
    for (int i = 1; i <= donors; ++i) load.row(i) << u(rng), u(rng);
    load.row(0) = load.bottomRows(donors).colwise().mean();
    Matrix f(2, periods);
    for (int t = 0; t < periods; ++t) f.col(t) << 100.0 - 4.0 * t + 2.0 * z(rng), 10.0 * z(rng);

    CsvTable t;
    t.header = {"unit", "period", "value"};
    for (int i = 0; i <= donors; ++i) {
        const std::string name = i == 0 ? "treated" : (i < 10 ? "donor0" : "donor") + std::to_string(i);
        for (int p = 0; p < periods; ++p) {
            const double v = load.row(i).dot(f.col(p)) + 1.5 * z(rng);
            t.rows.push_back({name, std::to_string(1985 + p), format_double(v)});
        }
    }
    write_csv(dir / "sc_panel.csv", t);
}

}  // namespace

int main(int argc, char** argv) {
    const std::filesystem::path dir = argc > 1 ? argv[1] : "data";
    try {
        regression_data(dir);
        raw_data(dir);
        panel_data(dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << "wrote bundled data to " << dir.string() << "\n";
    return 0;
}
