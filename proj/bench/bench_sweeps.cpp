// Serial reference vs OpenMP sweep on the bundled data.
// Thread count follows OMP_NUM_THREADS.

#include "descent/csv.hpp"
#include "descent/experiments.hpp"

#include <benchmark/benchmark.h>

#include <filesystem>
#include <numeric>

using namespace descent;

namespace {

const std::filesystem::path kData = std::filesystem::path(DESCENT_SOURCE_DIR) / "data";

std::vector<Index> one_to(Index k) {
    std::vector<Index> grid(static_cast<std::size_t>(k));
    std::iota(grid.begin(), grid.end(), Index{1});
    return grid;
}

void ols_curve(benchmark::State& state, Execution exec) {
    const RegressionDataset train = read_tabular(kData / "ols_train.csv", "y");
    const RegressionDataset eval = read_tabular(kData / "ols_eval.csv", "y");
    const std::vector<Index> grid = one_to(train.k());
    const std::vector<EvalPlan> evals{EvalPlan{}, EvalPlan{10, 100, 12}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(ols_descent_curve(train, eval, OrderingPlan{5, 11, true}, evals, grid, {}, exec));
    }
}

void sc_curve(benchmark::State& state, Execution exec) {
    PanelSpec spec;
    spec.target = "treated";
    spec.pre_periods = 3;
    spec.post_periods = 2;
    const Panel panel = read_panel(kData / "sc_panel.csv", spec).panel;
    const std::vector<Index> grid = one_to(panel.donors());
    for (auto _ : state) {
        benchmark::DoNotOptimize(sc_descent_curve(panel, DonorSubset::all(panel.donors()), grid, 10000, 13, {}, exec));
    }
}

}  // namespace

BENCHMARK_CAPTURE(ols_curve, serial, Execution::Serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(ols_curve, parallel, Execution::Parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(sc_curve, serial, Execution::Serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(sc_curve, parallel, Execution::Parallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
