#include "ibp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "ibp/error.hpp"

namespace ibp {
namespace {

constexpr double kPointMassTolerance = 1e-9;

}  // namespace

double evidence_log_likelihood(const Scenario& scenario, const RobotPlan& evidence, const Trajectory& human) {
  const auto& p = scenario.params;
  const double sd = p.dt * p.sigma;
  double log_w = 0.0;
  for (int t = 0; t < scenario.horizon; ++t) {
    const AgentState& h = human.states[t];
    const AgentState& r = evidence.states[t];
    const double target = target_offset(r, h, right_of_way(h, r) == RightOfWay::kHuman, p);
    const double mean = step_mean_velocity(r, target, p);
    const double observed = evidence.states[t + 1].v;
    if (sd == 0.0) {
      if (std::abs(observed - std::max(0.0, mean)) > kPointMassTolerance) {
        return -std::numeric_limits<double>::infinity();
      }
      continue;
    }
    const double z = (observed - mean) / sd;
    log_w += -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return log_w;
}

ConditionalEstimate conditional_lw(const Scenario& scenario, const RobotPlan& evidence, int n_samples,
                                   const SeedKey& seed, double ess_floor) {
  require(n_samples >= 1, ErrorCode::kInvalidArgument, "conditional_lw needs n_samples >= 1");
  require(evidence.horizon() == scenario.horizon, ErrorCode::kShape, "evidence horizon differs from scenario horizon");
  require(evidence.states.front() == scenario.robot0, ErrorCode::kShape,
          "evidence does not start at the scenario's robot state");
  require(position_residual(evidence.states, scenario.params.dt) <= kPlanPositionTolerance,
          ErrorCode::kZeroWeightEvidence, "evidence positions are inconsistent with its velocities");

  ConditionalEstimate out;
  out.evidence = evidence;
  out.samples.samples.reserve(n_samples);
  std::vector<double> log_w(n_samples);
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_samples; ++i) {
    out.samples.samples.push_back(rollout_intervened(scenario, evidence, seed.child(i)));
    log_w[i] = evidence_log_likelihood(scenario, evidence, out.samples.samples.back());
    best = std::max(best, log_w[i]);
  }
  require(std::isfinite(best), ErrorCode::kZeroWeightEvidence, "every sample has zero likelihood under the evidence");

  auto& w = out.samples.weights;
  w.resize(n_samples);
  double total = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    w[i] = std::exp(log_w[i] - best);
    total += w[i];
  }
  for (auto& x : w) x /= total;
  out.ess = effective_sample_size(w);
  if (out.ess < ess_floor) {
    std::ostringstream os;
    os << "degenerate evidence: effective sample size " << out.ess << " of " << n_samples << " is below "
       << ess_floor;
    out.warning = os.str();
  }
  return out;
}

SampleSet interventional_mc(const Scenario& scenario, const RobotPlan& plan, int n_samples, const SeedKey& seed) {
  require(n_samples >= 1, ErrorCode::kInvalidArgument, "interventional_mc needs n_samples >= 1");
  SampleSet out;
  out.samples.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    out.samples.push_back(rollout_intervened(scenario, plan, seed.child(i)));
  }
  return out;
}

SampleSet resample_uniform(const SampleSet& weighted, std::size_t count, const SeedKey& key) {
  if (!weighted.weighted()) {
    require(count == weighted.size(), ErrorCode::kShape, "resampling an unweighted set must keep its size");
    return weighted;
  }
  RandomStream stream(key);
  const auto ancestors = systematic_resample(weighted.weights, count, stream);
  SampleSet out;
  out.samples.reserve(count);
  for (auto i : ancestors) out.samples.push_back(weighted.samples[i]);
  return out;
}

DistributionSummary summarize(const Scenario& scenario, const RobotPlan& plan, const SampleSet& samples,
                              const CompareOptions& options) {
  samples.validate();
  const std::size_t n = samples.size();
  const int horizon = scenario.horizon;
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) weights[i] = samples.weight(i);

  DistributionSummary out;
  std::vector<double> column(n);
  for (int t = 0; t <= horizon; ++t) {
    for (std::size_t i = 0; i < n; ++i) column[i] = samples.samples[i].states[t].s;
    out.mean_position.push_back(weighted_mean(column, weights));
    if (t >= 1) out.position.push_back(histogram(column, weights, options.position_edges));
    for (std::size_t i = 0; i < n; ++i) column[i] = samples.samples[i].states[t].v;
    out.mean_speed.push_back(weighted_mean(column, weights));
  }

  const auto robot_crossing = first_crossing(plan.states);
  std::vector<double> distances(n);
  std::vector<double> collided(n);
  std::vector<double> not_yield(n);
  for (std::size_t i = 0; i < n; ++i) {
    distances[i] = min_distance(samples.samples[i], plan, scenario.geometry);
    collided[i] = distances[i] < scenario.collision_threshold ? 1.0 : 0.0;
    const auto human_crossing = first_crossing(samples.samples[i].states);
    const bool robot_first = robot_crossing && (!human_crossing || *robot_crossing < *human_crossing);
    not_yield[i] = robot_first ? 0.0 : 1.0;
  }
  out.min_distance = histogram(distances, weights, options.distance_edges);
  out.collision_probability = weighted_mean(collided, weights);
  out.not_yield_probability = weighted_mean(not_yield, weights);

  const double onset_speed = scenario.human0.v - options.onset_drop;
  for (int t = 1; t <= horizon; ++t) {
    if (out.mean_speed[t] <= onset_speed) {
      out.deceleration_onset = t;
      break;
    }
  }
  return out;
}

DistributionComparison compare(const Scenario& scenario, const RobotPlan& plan, const CompareOptions& options,
                               const SeedKey& seed) {
  scenario.validate();
  validate_plan(plan, scenario);
  const auto conditional = conditional_lw(scenario, plan, options.n_samples, seed, options.ess_floor);
  const auto interventional = interventional_mc(scenario, plan, options.n_samples, seed);

  DistributionComparison out;
  out.conditional = summarize(scenario, plan, conditional.samples, options);
  out.interventional = summarize(scenario, plan, interventional, options);
  out.ess = conditional.ess;
  out.warning = conditional.warning;
  return out;
}

}  // namespace ibp
