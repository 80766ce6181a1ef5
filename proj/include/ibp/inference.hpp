#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ibp/idm.hpp"
#include "ibp/stats.hpp"

namespace ibp {

struct ConditionalEstimate {
  SampleSet samples;  // weights normalized to sum to 1
  double ess = 0.0;
  RobotPlan evidence;
  std::optional<std::string> warning;  // set when ess < ess_floor
};

inline constexpr double kDefaultEssFloor = 10.0;

// Likelihood weighting for p(x_h,1:T | x_h,0, x_r,0, x_r,1:T = evidence).
//
// Sample i rolls the human forward against the evidence robot states with
// noise from seed.child(i), exactly as rollout_intervened does. Its weight
// is the product over t of the Normal density of the evidence velocity
// v_r,t+1 with mean step_mean_velocity(robot_t, target_t) and std dt*sigma,
// where the robot's target follows the right-of-way at step t. Positions are
// deterministic given velocities, so they are checked rather than weighted.
// The density is evaluated before the clamp at zero speed.
//
// With sigma == 0 the density is a point mass: a sample survives only if
// every evidence velocity equals the clamped mean. If no sample survives,
// throws kZeroWeightEvidence.
ConditionalEstimate conditional_lw(const Scenario& scenario, const RobotPlan& evidence, int n_samples,
                                   const SeedKey& seed, double ess_floor = kDefaultEssFloor);

// Log-likelihood of the evidence velocities along one human trajectory.
// Returns -inf for a zero-probability path (only possible with sigma == 0).
double evidence_log_likelihood(const Scenario& scenario, const RobotPlan& evidence, const Trajectory& human);

// n_samples draws of rollout_intervened(scenario, plan, seed.child(i)),
// uniform weights.
SampleSet interventional_mc(const Scenario& scenario, const RobotPlan& plan, int n_samples, const SeedKey& seed);

// Equal-weight resample of a weighted set (systematic, keyed by `key`).
SampleSet resample_uniform(const SampleSet& weighted, std::size_t count, const SeedKey& key);

struct CompareOptions {
  int n_samples = 10000;
  std::vector<double> position_edges = linspace_edges(-10.0, 16.0, 52);
  std::vector<double> distance_edges = linspace_edges(0.0, 20.0, 40);
  double onset_drop = 0.5;  // m/s below v_h,0 that marks the start of braking
  double ess_floor = kDefaultEssFloor;
};

struct DistributionSummary {
  std::vector<Histogram> position;   // s_h,t histograms for t = 1 ... T
  Histogram min_distance;
  double collision_probability = 0.0;  // mass with min distance < threshold
  double not_yield_probability = 0.0;  // mass where the robot does not reach s = 0 first
  std::vector<double> mean_position;   // weighted mean s_h,t for t = 0 ... T
  std::vector<double> mean_speed;      // weighted mean v_h,t for t = 0 ... T
  std::optional<int> deceleration_onset;
};

struct DistributionComparison {
  DistributionSummary conditional;
  DistributionSummary interventional;
  double ess = 0.0;
  std::optional<std::string> warning;
};

// Summarizes a (possibly weighted) human sample set against the robot plan.
DistributionSummary summarize(const Scenario& scenario, const RobotPlan& plan, const SampleSet& samples,
                              const CompareOptions& options);

// Conditional (likelihood weighting) vs interventional (rollouts under the
// plan) human distributions. Both use `seed`, so the interventional sample
// is exactly the unweighted proposal of the conditional estimate.
DistributionComparison compare(const Scenario& scenario, const RobotPlan& plan, const CompareOptions& options,
                               const SeedKey& seed);

}  // namespace ibp
