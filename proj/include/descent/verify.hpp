#pragma once

// Invariant suites over self-generated random instances for both estimator
// families. Rank failures are counted per suite rather than aborting a run.

#include "descent/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace descent {

enum class Generator { Gaussian, RankDeficient };

Generator parse_generator(const std::string& name);

struct SuiteOptions {
    int instances = 0;
    std::uint64_t seed = 0;
    Generator generator = Generator::Gaussian;
    RankTolerance tol;
    SolverSettings solver;
};

struct SuiteReport {
    std::string name;
    int instances = 0;
    int checked = 0;      // instances that reached the invariant check
    int rank_errors = 0;  // instances rejected by a rank check
    int violations = 0;
    std::map<std::string, double> metrics;  // max residuals, min slacks
    std::vector<std::string> failures;      // first few violation messages
    double seconds = 0.0;

    bool pass() const { return violations == 0; }
};

// |J| = n+1..n+6 over n = 1..5: coefficient identity, weight feasibility and
// the portfolio bound at held-out points.
SuiteReport verify_model_averaging(const SuiteOptions& opt);
// Trace comparison against every leave-one-out submodel; Monte Carlo check when mc_draws > 0.
SuiteReport verify_variance_reduction(const SuiteOptions& opt, int mc_draws);
// Both branches of the variation hierarchy; opt.instances pairs per branch.
SuiteReport verify_variation_hierarchy(const SuiteOptions& opt);
// Random panels with |J| = 2..6 and T = 1..4, one in four with duplicated
// donors; decomposition residual and the portfolio bound at post periods.
SuiteReport verify_sc_decomposition(const SuiteOptions& opt);
// Exhaustive-permutation audit: empirical premise implies empirical conclusion.
SuiteReport verify_permutation_implication(const SuiteOptions& opt);

struct VerifyReport {
    std::vector<SuiteReport> suites;

    bool pass() const;
    nlohmann::json to_json() const;
    std::string to_text() const;
};

VerifyReport run_verify(const VerifyConfig& config);

}  // namespace descent
