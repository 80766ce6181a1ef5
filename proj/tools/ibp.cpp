// ibp: simulate the two-car intersection, compare conditional and
// interventional predictions, and audit predictors for temporal leakage.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "ibp/cli/commands.hpp"
#include "ibp/parallel.hpp"

using namespace ibp;
using namespace ibp::cli;

namespace {

// Flags land here first; only the ones the user gave override the base
// config (from --config or --preset).
struct Flags {
  std::string config_path;
  std::string preset = "paper-toy";
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;

  double sigma = 0.0;
  int horizon = 0;
  std::string plan;
  std::string plan_file;
  double accel = 0.0;
  double v_max = 0.0;

  std::string mode;
  int trials = 0;
  int bins = 0;
  bool no_svg = false;
  double ess_floor = 0.0;

  int scenarios = 0;
  std::string dataset;
  std::vector<std::string> predictors;
  std::string endpoint;
  std::string tcp;
  std::vector<std::string> vars;
  double timeout = 0.0;
  int k = 0;
  std::vector<int> cuts;
  std::vector<std::string> metrics;
  std::vector<std::string> gate;
  double epsilon = 0.0;
  bool no_crn = false;
  std::string plan_set;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_path, "Rerun from a saved config.json")->check(CLI::ExistingFile);
  app->add_option("--preset", f.preset, "Named defaults (paper-toy)");
  app->add_option("--out", f.out, "Output directory");
  app->add_option("--seed", f.seed, "Root seed");
  app->add_option("--threads", f.threads, "Worker threads (default: IBP_THREADS or 1)")->check(CLI::PositiveNumber);
}

void add_scenario(CLI::App* app, Flags& f) {
  app->add_option("--sigma", f.sigma, "Acceleration noise std [m/s^2]");
  app->add_option("--horizon", f.horizon, "Prediction horizon in steps");
}

void add_plan(CLI::App* app, Flags& f) {
  app->add_option("--plan", f.plan, "Robot plan: accelerate | natural | file");
  app->add_option("--plan-file", f.plan_file, "CSV plan with header t,s,v (implies --plan file)");
  app->add_option("--accel", f.accel, "Plan acceleration [m/s^2]");
  app->add_option("--v-max", f.v_max, "Plan top speed [m/s]");
}

void add_endpoint(CLI::App* app, Flags& f) {
  app->add_option("--endpoint", f.endpoint, "Launch command of an external predictor (child process)");
  app->add_option("--tcp", f.tcp, "HOST:PORT of an external predictor server");
  app->add_option("--var", f.vars, "KEY=VALUE substituted for {KEY} in the endpoint command");
  app->add_option("--timeout", f.timeout, "Per-request timeout [s]");
}

void add_audit(CLI::App* app, Flags& f) {
  app->add_option("--dataset", f.dataset, "Dataset file from gen-dataset (default: generate)");
  app->add_option("--scenarios", f.scenarios, "Scenarios to generate when no dataset is given");
  app->add_option("--k", f.k, "Marginal draws per scenario");
  app->add_option("--cuts", f.cuts, "Segment cut points, last equals the horizon")->delimiter(',');
  app->add_option("--metrics", f.metrics, "Metrics to attribute (ADE, FDE, KDE_NLL)")->delimiter(',');
  app->add_option("--gate", f.gate, "Metrics whose late-segment attribution is gated")->delimiter(',');
  app->add_option("--epsilon", f.epsilon, "Gate threshold [m]");
  app->add_flag("--no-crn", f.no_crn, "Draw fresh marginals per subset");
  app->add_option("--plan-set", f.plan_set, "CSV of marginal robot plans (scenario_id,plan_id,t,s,v)");
}

bool given(const CLI::App* app, const char* name) {
  const auto* opt = app->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

std::vector<MetricKind> parse_metrics(const std::vector<std::string>& names) {
  std::vector<MetricKind> out;
  for (const auto& n : names) {
    const auto kind = metric_from_string(n);
    if (!kind) fail(ErrorCode::kConfig, "unknown metric '" + n + "'");
    out.push_back(*kind);
  }
  return out;
}

std::optional<extproto::EndpointDescriptor> endpoint_from_flags(const CLI::App* app, const Flags& f) {
  if (!given(app, "--endpoint") && !given(app, "--tcp")) return std::nullopt;
  require(!(given(app, "--endpoint") && given(app, "--tcp")), ErrorCode::kConfig, "use either --endpoint or --tcp");
  extproto::EndpointDescriptor e;
  if (given(app, "--endpoint")) {
    e.transport = extproto::Transport::kChildProcess;
    e.command = f.endpoint;
  } else {
    e.transport = extproto::Transport::kTcp;
    const auto colon = f.tcp.rfind(':');
    require(colon != std::string::npos, ErrorCode::kConfig, "--tcp expects HOST:PORT");
    e.host = f.tcp.substr(0, colon);
    try {
      e.port = std::stoi(f.tcp.substr(colon + 1));
    } catch (const std::exception&) {
      fail(ErrorCode::kConfig, "--tcp expects HOST:PORT");
    }
  }
  for (const auto& kv : f.vars) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos, ErrorCode::kConfig, "--var expects KEY=VALUE, got '" + kv + "'");
    e.vars[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (given(app, "--timeout")) e.timeout_seconds = f.timeout;
  return e;
}

RunConfig build_config(const CLI::App* app, const std::string& command, const Flags& f) {
  RunConfig c = given(app, "--config") ? load_config(f.config_path) : preset(f.preset);
  if (given(app, "--config")) {
    require(c.command == command, ErrorCode::kConfig,
            "config '" + f.config_path + "' is for '" + c.command + "', not '" + command + "'");
  }
  c.command = command;
  if (given(app, "--out")) c.out_dir = f.out;
  if (given(app, "--seed")) c.seed = f.seed;
  if (given(app, "--sigma")) c.scenario.params.sigma = f.sigma;
  if (given(app, "--horizon")) c.scenario.horizon = f.horizon;
  if (given(app, "--plan")) c.plan.kind = f.plan;
  if (given(app, "--plan-file")) {
    c.plan.kind = "file";
    c.plan.path = f.plan_file;
  }
  if (given(app, "--accel")) c.plan.accel = f.accel;
  if (given(app, "--v-max")) c.plan.v_max = f.v_max;
  if (given(app, "--mode")) c.sim_mode = f.mode;
  if (given(app, "--trials")) {
    if (command == "simulate") {
      c.trials = f.trials;
    } else {
      c.n_samples = f.trials;
    }
  }
  if (given(app, "--bins")) c.position_bins.bins = f.bins;
  if (given(app, "--no-svg")) c.svg = false;
  if (given(app, "--ess-floor")) c.ess_floor = f.ess_floor;
  if (given(app, "--scenarios")) c.n_scenarios = f.scenarios;
  if (given(app, "--dataset")) c.dataset_path = f.dataset;
  if (given(app, "--k")) c.k = f.k;
  if (given(app, "--cuts")) c.scheme.cuts = f.cuts;
  if (given(app, "--metrics")) c.metrics = parse_metrics(f.metrics);
  if (given(app, "--gate")) c.gated = parse_metrics(f.gate);
  if (given(app, "--epsilon")) c.epsilon = f.epsilon;
  if (given(app, "--no-crn")) c.common_random_numbers = false;
  if (given(app, "--plan-set")) c.plan_set = f.plan_set;

  const auto endpoint = endpoint_from_flags(app, f);
  if (given(app, "--predictor") || endpoint) {
    c.predictors.clear();
    for (const auto& tag : f.predictors) c.predictors.push_back({tag, std::nullopt});
    if (endpoint) {
      // An endpoint takes the last --predictor name as its tag.
      if (c.predictors.empty()) c.predictors.push_back({command == "probe" ? "probe" : "external", std::nullopt});
      c.predictors.back().endpoint = endpoint;
    }
  }
  if (command == "audit") {
    require(given(app, "--epsilon") || given(app, "--config"), ErrorCode::kConfig,
            "audit requires --epsilon (the gate threshold in metres)");
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interventional behavior prediction: simulation, toy study and Shapley audits"};
  app.require_subcommand(1);
  Flags f;

  auto* simulate = app.add_subcommand("simulate", "Joint or intervened rollouts as a trajectory table");
  add_common(simulate, f);
  add_scenario(simulate, f);
  add_plan(simulate, f);
  simulate->add_option("--mode", f.mode, "joint | intervened");
  simulate->add_option("--trials", f.trials, "Number of rollouts");

  auto* toy = app.add_subcommand("toy-compare", "Conditional vs interventional human distributions");
  add_common(toy, f);
  add_scenario(toy, f);
  add_plan(toy, f);
  toy->add_option("--trials", f.trials, "Samples per estimate");
  toy->add_option("--bins", f.bins, "Position histogram bins");
  toy->add_option("--ess-floor", f.ess_floor, "Warn below this effective sample size");
  toy->add_flag("--no-svg", f.no_svg, "Skip the SVG plots");

  auto* gen = app.add_subcommand("gen-dataset", "Synthetic scenarios with joint ground truth");
  add_common(gen, f);
  add_scenario(gen, f);
  gen->add_option("--scenarios", f.scenarios, "Number of scenarios");

  auto* audit_cmd = app.add_subcommand("audit", "Shapley attribution of early accuracy to query segments");
  add_common(audit_cmd, f);
  add_scenario(audit_cmd, f);
  add_audit(audit_cmd, f);
  add_endpoint(audit_cmd, f);
  audit_cmd->add_option("--predictor", f.predictors, "Built-in predictor tag, or the name of --endpoint");

  auto* bench = app.add_subcommand("bench", "Accuracy table with audit verdicts");
  add_common(bench, f);
  add_scenario(bench, f);
  add_audit(bench, f);
  add_endpoint(bench, f);
  bench->add_option("--predictor", f.predictors, "Predictor tags (repeatable)");

  auto* probe_cmd = app.add_subcommand("probe", "Conformance checks for an external predictor");
  add_common(probe_cmd, f);
  add_endpoint(probe_cmd, f);
  probe_cmd->add_option("--predictor", f.predictors, "Name for the endpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfigError;
  }

  CLI::App* chosen = app.get_subcommands().front();
  try {
    const RunConfig config = build_config(chosen, chosen->get_name(), f);
    Context ctx{given(chosen, "--threads") ? f.threads : default_thread_count(), &std::cout, &std::cerr};
    return run_command(config, ctx);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
