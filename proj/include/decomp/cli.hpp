#pragma once

#include <string>
#include <vector>

#include "decomp/mc.hpp"
#include "decomp/serialize.hpp"
#include "decomp/solver.hpp"

namespace decomp::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitInternal = 2;
inline constexpr int kExitNotExists = 3;
inline constexpr int kExitUndetermined = 4;
inline constexpr int kExitVerifyFailed = 5;

struct CommandResult {
  int exit_code = kExitOk;
  Json report;
  std::vector<std::string> files;  ///< data files written, in write order
};

CommandResult cmd_analyze(const RunConfig& config);
CommandResult cmd_solve(const RunConfig& config);
CommandResult cmd_verify(const RunConfig& config);
CommandResult cmd_simulate(const RunConfig& config);

/// Runs one command, maps engine errors to exit codes, fills the common report
/// header and writes `<out>/<command>.json` when an output directory is set.
CommandResult run_command(const std::string& command, const RunConfig& config);

/// As run_command, from config text; parse errors give an input-error report.
CommandResult run_command_text(const std::string& command, const std::string& config_text);

int exit_code_for(const std::exception& e) noexcept;

SolverOptions solver_options(const RunOptions& options);

Json to_json(const ExistenceReport& report);
Json to_json(const VerificationReport& report);
Json to_json(const DecayReport& report);
Json to_json(const TwoSampleResult& result);
/// Solution summary; empirical marginals are referenced by `files` names.
Json to_json(const SolutionFamily& family, const std::vector<std::string>& files = {});

/// Rebuilds a family from a solution summary (or a whole solve report).
/// Sample files are resolved relative to `base_dir`.
SolutionFamily family_from_json(const Json& j, const std::string& base_dir);

/// A finite number, or the strings "inf", "-inf", "nan".
Json number_json(double v);

}  // namespace decomp::cli
