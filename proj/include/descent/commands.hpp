#pragma once

// The four CLI commands as library calls, plus the argument-parsing entry
// point. Every command reads a JSON config, writes its outputs atomically and
// returns the paths it wrote.

#include "descent/config.hpp"
#include "descent/experiments.hpp"
#include "descent/verify.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace descent {

struct CommandOutput {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> warnings;
};

CommandOutput cmd_expand_features(const ExpandConfig& config);
CommandOutput cmd_ols_curve(const OlsCurveConfig& config, Execution exec = Execution::Parallel);
CommandOutput cmd_sc_curve(const ScCurveConfig& config, Execution exec = Execution::Parallel);

struct VerifyOutput {
    CommandOutput output;
    VerifyReport report;
};

VerifyOutput cmd_verify(const VerifyConfig& config);

// CSV renderings of curves in the command schemas.
CsvTable ols_curve_table(const DescentCurve& curve);
CsvTable ols_ordering_table(const std::vector<DescentCurve>& per_ordering);
CsvTable sc_curve_table(const DescentCurve& curve);

// Exit codes: 0 success, 1 validation, 2 numerical failure, 3 I/O.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace descent
