#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ibp/extproto.hpp"
#include "ibp/inference.hpp"
#include "ibp/shapley.hpp"
#include "json.hpp"

namespace ibp::cli {

inline constexpr int kConfigSchemaVersion = 1;

struct HistogramSpec {
  double lo = 0.0;
  double hi = 1.0;
  int bins = 10;

  std::vector<double> edges() const;
};

// Robot plan used by simulate (intervened) and toy-compare.
//   accelerate: accelerate at `accel` up to `v_max`
//   natural:    the robot of one joint rollout under the run seed
//   file:       CSV with header t,s,v
struct PlanSpec {
  std::string kind = "accelerate";
  double accel = 5.0;
  double v_max = 10.0;
  std::string path;
};

// A built-in tag, or any tag plus an endpoint for an external predictor.
struct PredictorSpec {
  std::string tag = "ibp-oracle";
  std::optional<extproto::EndpointDescriptor> endpoint;
};

// Everything that determines a run's numeric output. Thread count is
// deliberately absent: results do not depend on it.
struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::string command;
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  Scenario scenario{};
  PlanSpec plan{};

  // simulate
  std::string sim_mode = "joint";  // joint | intervened
  int trials = 1;

  // toy-compare
  int n_samples = 10000;
  HistogramSpec position_bins{-10.0, 16.0, 52};
  HistogramSpec distance_bins{0.0, 20.0, 40};
  double onset_drop = 0.5;
  double ess_floor = kDefaultEssFloor;
  bool svg = true;

  // gen-dataset, audit, bench
  int n_scenarios = 100;
  DatasetRanges ranges{};
  std::string dataset_path;  // empty: generate in memory

  // audit uses the first predictor; bench evaluates all of them
  std::vector<PredictorSpec> predictors{PredictorSpec{}};
  int cbp_importance_factor = 20;
  SegmentScheme scheme{};
  std::vector<MetricKind> metrics{MetricKind::kAde, MetricKind::kFde, MetricKind::kKdeNll};
  std::vector<MetricKind> gated{MetricKind::kFde};
  int k = 64;
  int samples_per_query = 1;
  int kde_samples_per_query = 16;
  double epsilon = 0.01;
  bool common_random_numbers = true;
  KdeOptions kde{};
  std::string plan_set;  // CSV of marginal plans; empty: robot marginal

  // Throws Error(kConfig) naming the field.
  void validate() const;
  AuditOptions audit_options(int threads) const;
};

// "paper-toy": the two-car toy study, defaults above, 10000 trials.
RunConfig preset(const std::string& name);

nlohmann::json to_json(const RunConfig& config);
// Strict: unknown keys and type mismatches are kConfig errors naming the
// field. Missing keys keep their defaults.
RunConfig from_json(const nlohmann::json& j);

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& config, const std::string& path);

nlohmann::json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j, const std::string& where);

}  // namespace ibp::cli
