#include "ibp/cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "ibp/cli/output.hpp"
#include "ibp/error.hpp"
#include "ibp/inference.hpp"
#include "ibp/parallel.hpp"

namespace ibp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

ExitCode exit_code_for(const Error& error) {
  switch (error.code()) {
    case ErrorCode::kPredictorFailure:
    case ErrorCode::kTimeout:
    case ErrorCode::kMalformedMessage:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kDeterminismViolation:
    case ErrorCode::kInvariantViolation:
      return kExitPredictorFailure;
    default:
      return kExitConfigError;
  }
}

PredictorHandle resolve_predictor(const PredictorSpec& spec, int cbp_importance_factor) {
  if (spec.endpoint) return extproto::make_external(*spec.endpoint, spec.tag);
  if (spec.tag == "cbp-oracle") return make_cbp_oracle(spec.tag, cbp_importance_factor);
  return make_builtin(spec.tag);
}

std::vector<DatasetItem> resolve_dataset(const RunConfig& c) {
  if (!c.dataset_path.empty()) return load_dataset(c.dataset_path);
  return dataset_generate(c.n_scenarios, c.ranges, c.scenario.params, c.scenario.horizon, c.seed);
}

RobotPlan resolve_plan(const RunConfig& c) {
  RobotPlan plan;
  if (c.plan.kind == "accelerate") {
    plan = plan_accelerate(c.scenario, c.plan.accel, c.plan.v_max);
  } else if (c.plan.kind == "natural") {
    plan = RobotPlan::from_trajectory(rollout_joint(c.scenario, SeedKey{c.seed, 0, 0, SeedRole::kHumanNoise}).robot);
  } else {
    plan = load_plan_csv(c.plan.path);
  }
  try {
    validate_plan(plan, c.scenario);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, std::string("config field 'plan': ") + e.what());
  }
  return plan;
}

namespace {

std::ostream& out(const Context& ctx) { return *ctx.out; }
std::ostream& err(const Context& ctx) { return *ctx.err; }

std::string prepare(const RunConfig& config, const char* command) {
  require(config.command == command, ErrorCode::kConfig,
          "config is for '" + config.command + "', not '" + std::string(command) + "'");
  config.validate();
  const fs::path dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::kIo, "cannot create output directory '" + config.out_dir + "'");
  save_config(config, (dir / "config.json").string());
  return dir.string();
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string prob(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", p);
  return buf;
}

json summary_json(const DistributionSummary& s) {
  json tails = json::array();
  for (std::size_t t = 0; t < s.position.size(); ++t) {
    const auto& h = s.position[t];
    double mass = h.below + h.above;
    for (double m : h.masses) mass += m;
    tails.push_back({{"t", t + 1}, {"below", h.below}, {"above", h.above}, {"total_mass", mass}});
  }
  return {{"collision_probability", s.collision_probability},
          {"not_yield_probability", s.not_yield_probability},
          {"deceleration_onset", s.deceleration_onset ? json(*s.deceleration_onset) : json(nullptr)},
          {"mean_position", s.mean_position},
          {"mean_speed", s.mean_speed},
          {"position_mass", tails},
          {"min_distance_mass",
           {{"below", s.min_distance.below}, {"above", s.min_distance.above}, {"in_range", s.min_distance.in_range()}}}};
}

std::string onset_text(const std::optional<int>& onset, double dt) {
  if (!onset) return "none within the horizon";
  char buf[64];
  std::snprintf(buf, sizeof buf, "step %d (%.1f s)", *onset, *onset * dt);
  return buf;
}

struct BenchRow {
  std::string tag;
  std::map<MetricKind, double> values;
  std::string verdict;
  std::size_t failures = 0;
};

}  // namespace

ExitCode cmd_simulate(const RunConfig& c, const Context& ctx) {
  const auto dir = prepare(c, "simulate");
  const bool intervened = c.sim_mode == "intervened";
  const RobotPlan plan = intervened ? resolve_plan(c) : RobotPlan{};
  std::vector<JointRollout> rollouts(c.trials);
  parallel_for(rollouts.size(), ctx.threads, [&](std::size_t i) {
    const SeedKey key{c.seed, 0, i, SeedRole::kHumanNoise};
    if (intervened) {
      rollouts[i] = {rollout_intervened(c.scenario, plan, key), plan.as_trajectory()};
    } else {
      rollouts[i] = rollout_joint(c.scenario, key);
    }
  });
  CsvWriter csv(join(dir, "trajectories.csv"), {"trial", "t", "s_h", "v_h", "s_r", "v_r"});
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    for (int t = 0; t <= c.scenario.horizon; ++t) {
      const auto& h = rollouts[i].human[t];
      const auto& r = rollouts[i].robot[t];
      csv.cell(static_cast<std::uint64_t>(i)).cell(t).cell(h.s).cell(h.v).cell(r.s).cell(r.v).end_row();
    }
  }
  out(ctx) << "simulate: " << c.trials << " " << c.sim_mode << " rollout(s), horizon " << c.scenario.horizon
           << " -> " << join(dir, "trajectories.csv") << '\n';
  return kExitPass;
}

ExitCode cmd_toy_compare(const RunConfig& c, const Context& ctx) {
  const auto dir = prepare(c, "toy-compare");
  const RobotPlan plan = resolve_plan(c);
  CompareOptions options;
  options.n_samples = c.n_samples;
  options.position_edges = c.position_bins.edges();
  options.distance_edges = c.distance_bins.edges();
  options.onset_drop = c.onset_drop;
  options.ess_floor = c.ess_floor;
  const auto cmp = compare(c.scenario, plan, options, SeedKey{c.seed, 0, 0, SeedRole::kHumanNoise});

  if (cmp.warning) {
    err(ctx) << "\n!!! WARNING: " << *cmp.warning << " !!!\n"
             << "!!! The conditional estimate rests on very few effective samples. !!!\n\n";
  }

  CsvWriter pos(join(dir, "position_histograms.csv"), {"estimate", "t", "bin", "lo", "hi", "mass"});
  CsvWriter dist(join(dir, "min_distance_histogram.csv"), {"estimate", "bin", "lo", "hi", "mass"});
  CsvWriter means(join(dir, "mean_trajectory.csv"),
                  {"t", "s_h_conditional", "v_h_conditional", "s_h_interventional", "v_h_interventional", "s_r", "v_r"});
  for (const auto& [name, s] : {std::pair<std::string, const DistributionSummary*>{"conditional", &cmp.conditional},
                                {"interventional", &cmp.interventional}}) {
    for (std::size_t t = 0; t < s->position.size(); ++t) {
      const auto& h = s->position[t];
      for (std::size_t b = 0; b < h.masses.size(); ++b) {
        pos.cell(name).cell(static_cast<std::uint64_t>(t + 1)).cell(static_cast<std::uint64_t>(b));
        pos.cell(h.edges[b]).cell(h.edges[b + 1]).cell(h.masses[b]).end_row();
      }
    }
    const auto& h = s->min_distance;
    for (std::size_t b = 0; b < h.masses.size(); ++b) {
      dist.cell(name).cell(static_cast<std::uint64_t>(b)).cell(h.edges[b]).cell(h.edges[b + 1]).cell(h.masses[b]).end_row();
    }
  }
  for (int t = 0; t <= c.scenario.horizon; ++t) {
    means.cell(t).cell(cmp.conditional.mean_position[t]).cell(cmp.conditional.mean_speed[t]);
    means.cell(cmp.interventional.mean_position[t]).cell(cmp.interventional.mean_speed[t]);
    means.cell(plan.states[t].s).cell(plan.states[t].v).end_row();
  }
  write_json(join(dir, "summary.json"), {{"n_samples", c.n_samples},
                                         {"ess", cmp.ess},
                                         {"warning", cmp.warning ? json(*cmp.warning) : json(nullptr)},
                                         {"collision_threshold", c.scenario.collision_threshold},
                                         {"conditional", summary_json(cmp.conditional)},
                                         {"interventional", summary_json(cmp.interventional)}});

  if (c.svg) {
    for (std::size_t t = 0; t < cmp.conditional.position.size(); ++t) {
      char name[64];
      std::snprintf(name, sizeof name, "position_t%02zu.svg", t + 1);
      char title[96];
      std::snprintf(title, sizeof title, "human position at t = %.1f s", (t + 1) * c.scenario.params.dt);
      write_text(join(dir, name),
                 render_histogram_svg(title, "s_h [m]", cmp.conditional.position[t].edges,
                                      {{"conditional", "#1f77b4", cmp.conditional.position[t].masses},
                                       {"interventional", "#d62728", cmp.interventional.position[t].masses}}));
    }
    write_text(join(dir, "min_distance.svg"),
               render_histogram_svg("minimum distance between the cars", "distance [m]",
                                    cmp.conditional.min_distance.edges,
                                    {{"conditional", "#1f77b4", cmp.conditional.min_distance.masses},
                                     {"interventional", "#d62728", cmp.interventional.min_distance.masses}}));
  }

  const double dt = c.scenario.params.dt;
  out(ctx) << "toy-compare: " << c.n_samples << " samples per estimate, ESS " << prob(cmp.ess) << "\n"
           << "                         conditional   interventional\n"
           << "P(human does not yield)  " << prob(cmp.conditional.not_yield_probability) << "        "
           << prob(cmp.interventional.not_yield_probability) << "\n"
           << "P(min distance < " << fmt(c.scenario.collision_threshold) << " m)   "
           << prob(cmp.conditional.collision_probability) << "        "
           << prob(cmp.interventional.collision_probability) << "\n"
           << "deceleration onset: conditional " << onset_text(cmp.conditional.deceleration_onset, dt)
           << ", interventional " << onset_text(cmp.interventional.deceleration_onset, dt) << "\n"
           << "outputs in " << dir << "\n";
  return kExitPass;
}

ExitCode cmd_gen_dataset(const RunConfig& c, const Context& ctx) {
  const auto dir = prepare(c, "gen-dataset");
  require(c.dataset_path.empty(), ErrorCode::kConfig, "config field 'dataset.path' must be empty for gen-dataset");
  const auto items = dataset_generate(c.n_scenarios, c.ranges, c.scenario.params, c.scenario.horizon, c.seed);
  auto generator = to_json(c);
  generator.erase("out_dir");  // where the file went is not part of its content
  write_json(join(dir, "dataset.json"), {{"schema_version", kConfigSchemaVersion},
                                         {"generator", generator},
                                         {"items", dataset_to_json(items)}});
  out(ctx) << "gen-dataset: " << items.size() << " scenarios -> " << join(dir, "dataset.json") << '\n';
  return kExitPass;
}

ExitCode cmd_audit(const RunConfig& c, const Context& ctx) {
  const auto dir = prepare(c, "audit");
  const auto dataset = resolve_dataset(c);
  const auto predictor = resolve_predictor(c.predictors.front(), c.cbp_importance_factor);
  MarginalSampler sampler = sample_robot_marginal;
  if (!c.plan_set.empty()) sampler = PlanSetSampler::load_csv(c.plan_set);

  const auto started = std::chrono::steady_clock::now();
  const auto report = audit(predictor, dataset, c.audit_options(ctx.threads), sampler);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  auto report_json = report_to_json(report);
  if (const auto* cbp = dynamic_cast<const CbpOracle*>(predictor.get())) {
    report_json["degenerate_queries"] = cbp->degenerate_queries();
  }
  write_json(join(dir, "report.json"), report_json);
  const auto table = format_table(report);
  write_text(join(dir, "table.txt"), table);
  CsvWriter phi(join(dir, "phi.csv"), {"scenario_id", "metric", "segment", "phi"});
  for (const auto& sc : report.scenarios) {
    for (const auto& [metric, values] : sc.phi) {
      for (std::size_t j = 0; j < values.size(); ++j) {
        phi.cell(sc.id).cell(std::string(to_string(metric))).cell(static_cast<std::uint64_t>(j + 1)).cell(values[j]).end_row();
      }
    }
  }
  out(ctx) << table;
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.1f", seconds);
  err(ctx) << "audit finished in " << timing << " s on " << ctx.threads << " thread(s)\n";
  for (const auto& f : report.failures) err(ctx) << "scenario " << f.id << " failed: " << f.message << '\n';
  if (!report.failures.empty()) return kExitPredictorFailure;
  return report.verdict == Verdict::kPass ? kExitPass : kExitFail;
}

ExitCode cmd_bench(const RunConfig& c, const Context& ctx) {
  const auto dir = prepare(c, "bench");
  const auto dataset = resolve_dataset(c);
  MarginalSampler sampler = sample_robot_marginal;
  if (!c.plan_set.empty()) sampler = PlanSetSampler::load_csv(c.plan_set);

  std::vector<PredictorSpec> specs = c.predictors;
  const bool has_baseline = std::any_of(specs.begin(), specs.end(),
                                        [](const PredictorSpec& p) { return p.tag == "unconditioned" && !p.endpoint; });
  if (!has_baseline) specs.insert(specs.begin(), PredictorSpec{"unconditioned", std::nullopt});

  const std::vector<MetricKind> kinds{MetricKind::kAde, MetricKind::kFde, MetricKind::kKdeNll, MetricKind::kMinAde,
                                      MetricKind::kMinFde};
  std::vector<BenchRow> rows;
  bool any_failure = false;
  for (const auto& spec : specs) {
    BenchRow row;
    row.tag = spec.tag;
    const auto predictor = resolve_predictor(spec, c.cbp_importance_factor);
    std::vector<std::map<MetricKind, double>> per(dataset.size());
    std::vector<std::optional<std::string>> errors(dataset.size());
    parallel_for(dataset.size(), ctx.threads, [&](std::size_t i) {
      const auto& item = dataset[i];
      try {
        PredictionQuery q{item.scenario, item.truth_robot, c.k, SeedKey{c.seed, item.id, 0, SeedRole::kHumanNoise}};
        const auto samples = predictor->predict(q);
        const HorizonPrefix full{item.scenario.horizon};
        for (auto kind : kinds) per[i][kind] = evaluate(kind, samples, item.truth_human, full, c.kde);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    std::size_t ok = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (errors[i]) {
        ++row.failures;
        err(ctx) << "[" << spec.tag << "] scenario " << dataset[i].id << " failed: " << *errors[i] << '\n';
        continue;
      }
      ++ok;
      for (auto kind : kinds) row.values[kind] += per[i][kind];
    }
    for (auto& [kind, v] : row.values) v /= static_cast<double>(ok);
    const auto report = audit(predictor, dataset, c.audit_options(ctx.threads), sampler);
    row.failures += report.failures.size();
    row.verdict = std::string(to_string(report.verdict));
    any_failure = any_failure || row.failures > 0;
    rows.push_back(std::move(row));
  }

  const auto& base = rows.front().values;
  auto pct = [&](MetricKind kind, double v) {
    const auto it = base.find(kind);
    if (it == base.end() || it->second == 0.0) return std::nan("");
    return (v - it->second) / std::abs(it->second) * 100.0;
  };

  CsvWriter csv(join(dir, "bench.csv"), {"predictor", "metric", "value", "pct_vs_unconditioned", "verdict"});
  json bench = json::array();
  std::ostringstream table;
  char cell[96];
  std::snprintf(cell, sizeof cell, "%-20s", "predictor");
  table << cell;
  for (auto kind : kinds) {
    std::snprintf(cell, sizeof cell, "  %-18s", std::string(to_string(kind)).c_str());
    table << cell;
  }
  table << "  audit\n";
  for (const auto& row : rows) {
    json values = json::object();
    std::snprintf(cell, sizeof cell, "%-20s", row.tag.c_str());
    table << cell;
    for (auto kind : kinds) {
      const auto it = row.values.find(kind);
      const double v = it == row.values.end() ? std::nan("") : it->second;
      const double p = pct(kind, v);
      csv.cell(row.tag).cell(std::string(to_string(kind))).cell(v).cell(p).cell(row.verdict).end_row();
      values[std::string(to_string(kind))] = {{"value", v}, {"pct_vs_unconditioned", p}};
      char value[64];
      if (&row == &rows.front()) {
        std::snprintf(value, sizeof value, "%.3f", v);
      } else {
        std::snprintf(value, sizeof value, "%.3f (%+.1f%%)", v, p);
      }
      std::snprintf(cell, sizeof cell, "  %-18s", value);
      table << cell;
    }
    table << "  " << row.verdict << (row.failures ? " (failures)" : "") << '\n';
    bench.push_back({{"predictor", row.tag}, {"metrics", values}, {"verdict", row.verdict}, {"failures", row.failures}});
  }
  table << "audit: epsilon " << fmt(c.epsilon) << " m on";
  for (auto g : c.gated) table << ' ' << to_string(g);
  table << "; metrics over the full horizon, K = " << c.k << "\n";
  write_json(join(dir, "bench.json"), bench);
  write_text(join(dir, "bench.txt"), table.str());
  out(ctx) << table.str();
  return any_failure ? kExitPredictorFailure : kExitPass;
}

ExitCode cmd_probe(const RunConfig& c, const Context& ctx) {
  const auto dir = prepare(c, "probe");
  const auto& spec = c.predictors.front();
  require(spec.endpoint.has_value(), ErrorCode::kConfig, "probe needs an endpoint (--endpoint or --tcp)");
  const auto report = extproto::probe(*spec.endpoint);
  json checks = json::array();
  for (const auto& check : report.checks) {
    const char* status = check.passed ? "PASS" : (check.informational ? "FLAG" : "FAIL");
    out(ctx) << status << "  " << check.name << (check.informational ? " (informational)" : "") << ": "
             << check.detail << '\n';
    checks.push_back({{"name", check.name},
                      {"passed", check.passed},
                      {"informational", check.informational},
                      {"detail", check.detail}});
  }
  out(ctx) << (report.conformant() ? "conformant" : "not conformant") << '\n';
  write_json(join(dir, "probe.json"), {{"conformant", report.conformant()}, {"checks", checks}});
  const auto* handshake = report.find("handshake");
  if (!handshake || !handshake->passed) return kExitPredictorFailure;
  return report.conformant() ? kExitPass : kExitFail;
}

ExitCode run_command(const RunConfig& config, const Context& ctx) {
  try {
    if (config.command == "simulate") return cmd_simulate(config, ctx);
    if (config.command == "toy-compare") return cmd_toy_compare(config, ctx);
    if (config.command == "gen-dataset") return cmd_gen_dataset(config, ctx);
    if (config.command == "audit") return cmd_audit(config, ctx);
    if (config.command == "bench") return cmd_bench(config, ctx);
    if (config.command == "probe") return cmd_probe(config, ctx);
    fail(ErrorCode::kConfig, "unknown command '" + config.command + "'");
  } catch (const Error& e) {
    err(ctx) << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err(ctx) << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

}  // namespace ibp::cli
