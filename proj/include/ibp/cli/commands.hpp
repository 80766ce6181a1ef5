#pragma once

#include <iosfwd>
#include <vector>

#include "ibp/cli/config.hpp"
#include "ibp/error.hpp"

namespace ibp::cli {

enum ExitCode : int {
  kExitPass = 0,
  kExitFail = 1,
  kExitConfigError = 2,
  kExitPredictorFailure = 3,
};

struct Context {
  int threads = 1;
  std::ostream* out = nullptr;  // human-readable report
  std::ostream* err = nullptr;  // warnings and progress
};

ExitCode exit_code_for(const Error& error);

PredictorHandle resolve_predictor(const PredictorSpec& spec, int cbp_importance_factor);
// Loads config.dataset_path, or generates the dataset in memory.
std::vector<DatasetItem> resolve_dataset(const RunConfig& config);
RobotPlan resolve_plan(const RunConfig& config);

// Each command validates the config, writes it to <out_dir>/config.json and
// then its outputs. They throw ibp::Error; run_command maps errors to exit
// codes and prints them.
ExitCode cmd_simulate(const RunConfig& config, const Context& ctx);
ExitCode cmd_toy_compare(const RunConfig& config, const Context& ctx);
ExitCode cmd_gen_dataset(const RunConfig& config, const Context& ctx);
ExitCode cmd_audit(const RunConfig& config, const Context& ctx);
ExitCode cmd_bench(const RunConfig& config, const Context& ctx);
ExitCode cmd_probe(const RunConfig& config, const Context& ctx);

// Dispatches on config.command.
ExitCode run_command(const RunConfig& config, const Context& ctx);

}  // namespace ibp::cli
