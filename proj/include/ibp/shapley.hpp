#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ibp/metrics.hpp"
#include "ibp/predictors.hpp"

namespace ibp {

// Cut points 0 < t_1 < ... < t_m = T. Segment j (0-based) covers steps
// cuts[j-1]+1 ... cuts[j], with cuts[-1] = 0. Attribution targets the
// prediction over steps 1 ... t_1.
struct SegmentScheme {
  std::vector<int> cuts{4, 7, 10};

  int segments() const { return static_cast<int>(cuts.size()); }
  HorizonPrefix prefix() const { return {cuts.front()}; }
  // 0-based segment holding step t (t >= 1).
  int segment_of(int step) const;
  void validate(int horizon) const;

  static SegmentScheme equal_split(int horizon, int m);

  bool operator==(const SegmentScheme&) const = default;
};

using SubsetMask = std::uint32_t;

// Hybrid query: velocities of segments in `kept` come from `truth`, the rest
// from `replacement`; positions are re-integrated from the shared initial
// state so the result is a consistent plan. kept = all gives `truth`,
// kept = 0 gives `replacement`, both bit-exact.
RobotPlan splice_plan(const RobotPlan& truth, const RobotPlan& replacement, SubsetMask kept,
                      const SegmentScheme& scheme, double dt);

// Raw Shapley values of a set function given as nu[mask] for all 2^m masks.
std::vector<double> shapley_values(std::span<const double> nu, int m);

struct SetFunctionEval {
  SubsetMask subset = 0;
  std::map<MetricKind, double> values;
  int k = 0;
  SeedKey seed;
};

// Attributions for one metric from a full lattice of evaluations. Metrics
// are errors, so values are negated: positive means the segment earns
// credit for accuracy. Throws kIncompleteLattice when a subset is missing.
std::vector<double> shapley_exact(std::span<const SetFunctionEval> lattice, int m, MetricKind metric);

struct DatasetItem {
  std::uint64_t id = 0;
  Scenario scenario;
  Trajectory truth_human;
  RobotPlan truth_robot;
};

struct DatasetRanges {
  double s_min = 10.0;
  double s_max = 30.0;
  double v_min = 3.0;
  double v_max = 10.0;
};

// Initial states drawn uniformly per agent from `ranges` under
// SeedKey{seed, id, 0, scenario-draw}; truths from rollout_joint under
// SeedKey{seed, id, 0, human-noise}.
std::vector<DatasetItem> dataset_generate(int n_scenarios, const DatasetRanges& ranges, const IdmParams& params,
                                          int horizon, std::uint64_t seed);

struct NuOptions {
  std::vector<MetricKind> metrics{MetricKind::kAde, MetricKind::kFde, MetricKind::kKdeNll};
  int samples_per_query = 1;
  KdeOptions kde{};
};

// nu(S) for every metric: one hybrid query per marginal plan (predictor
// seed predictor_seed.child(k)), metric evaluated on each answer against
// the true human future over the scheme's prefix, then averaged over k.
SetFunctionEval eval_nu(const Predictor& predictor, const DatasetItem& item, SubsetMask subset,
                        const SegmentScheme& scheme, std::span<const RobotPlan> marginal_plans,
                        const SeedKey& predictor_seed, const NuOptions& options);

// Same, drawing the k marginal plans from `sampler` under `marginal_seed`.
SetFunctionEval eval_nu(const Predictor& predictor, const DatasetItem& item, SubsetMask subset,
                        const SegmentScheme& scheme, int k, const MarginalSampler& sampler,
                        const SeedKey& marginal_seed, const SeedKey& predictor_seed, const NuOptions& options);

enum class Verdict { kPass, kFail };
std::string_view to_string(Verdict verdict);

struct AuditOptions {
  SegmentScheme scheme{};
  std::vector<MetricKind> metrics{MetricKind::kAde, MetricKind::kFde, MetricKind::kKdeNll};
  std::vector<MetricKind> gated{MetricKind::kFde};
  int k = 64;
  int samples_per_query = 1;
  int kde_samples_per_query = 16;  // used instead when KDE_NLL is audited
  double epsilon = 0.01;
  bool common_random_numbers = true;
  int threads = 1;
  std::uint64_t seed = 0;
  KdeOptions kde{};
};

struct SegmentStat {
  double mean = 0.0;
  double std = 0.0;
};

struct ScenarioAttribution {
  std::uint64_t id = 0;
  std::map<MetricKind, std::vector<double>> phi;
  std::map<MetricKind, std::vector<double>> nu;  // indexed by subset mask
};

struct ScenarioFailure {
  std::uint64_t id = 0;
  std::string message;
};

struct ShapleyReport {
  std::string predictor;
  AuditOptions options;
  std::map<MetricKind, std::vector<SegmentStat>> stats;
  std::vector<ScenarioAttribution> scenarios;
  std::vector<ScenarioFailure> failures;
  Verdict verdict = Verdict::kFail;
  std::vector<std::string> violations;  // e.g. "FDE segment 2: mean 0.03 > 0.01"
};

// Mean and sample standard deviation per segment of `values[scenario][j]`.
std::vector<SegmentStat> segment_stats(const std::vector<std::vector<double>>& values, int m);

// PASS iff mean phi_j <= epsilon for every gated metric and every segment
// j >= 2 (1-based).
Verdict decide(const std::map<MetricKind, std::vector<SegmentStat>>& stats, const std::vector<MetricKind>& gated,
               double epsilon, std::vector<std::string>* violations = nullptr);

// Exact Shapley attribution of early-horizon accuracy to query segments,
// per scenario, then aggregated. With common random numbers every subset
// of a scenario reuses the same marginal draws and predictor seeds.
// Scenario-level predictor failures are recorded and skipped.
ShapleyReport audit(const PredictorHandle& predictor, std::span<const DatasetItem> dataset,
                    const AuditOptions& options, const MarginalSampler& sampler = sample_robot_marginal);

}  // namespace ibp
