#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ibp/idm.hpp"

namespace ibp {

enum class CausalClaim { kInterventional, kConditional, kUnknown };

std::string_view to_string(CausalClaim claim);

struct PredictionQuery {
  Scenario scenario;
  RobotPlan robot_future;  // the query trajectory, t = 0 ... T
  int k = 1;
  SeedKey seed;

  bool operator==(const PredictionQuery&) const = default;
};

// Throws kShape/kInvalidArgument for malformed queries.
void validate_query(const PredictionQuery& query);

// Throws kInvariantViolation (naming the first offending sample and step)
// unless `out` holds query.k valid trajectories of the query horizon that
// start at the queried human state.
void validate_prediction(const PredictionQuery& query, const SampleSet& out);

// Something that predicts human futures given a robot query trajectory.
// predict() must be a pure function of the query, seed included.
class Predictor {
 public:
  Predictor(std::string tag, CausalClaim claim) : tag_(std::move(tag)), claim_(claim) {}
  virtual ~Predictor() = default;

  const std::string& tag() const { return tag_; }
  CausalClaim causal_claim() const { return claim_; }

  // Validates the query and the answer. Failures inside the predictor are
  // rethrown as kPredictorFailure carrying the tag.
  SampleSet predict(const PredictionQuery& query) const;

 protected:
  virtual SampleSet do_predict(const PredictionQuery& query) const = 0;

 private:
  std::string tag_;
  CausalClaim claim_;
};

using PredictorHandle = std::shared_ptr<const Predictor>;

// s_t = s_0 - t dt v_0 with constant speed; ignores the robot.
PredictorHandle make_constant_velocity(std::string tag = "constant-velocity");

// Ignores the query plan: human marginal of the joint (reactive) system.
PredictorHandle make_unconditioned_oracle(std::string tag = "unconditioned");

// Draws from p(x_h | do(x_r = plan)): interventional_mc.
PredictorHandle make_ibp_oracle(std::string tag = "ibp-oracle");

class CbpOracle final : public Predictor {
 public:
  explicit CbpOracle(std::string tag = "cbp-oracle", int importance_factor = 20)
      : Predictor(std::move(tag), CausalClaim::kConditional), importance_factor_(importance_factor) {}

  int importance_factor() const { return importance_factor_; }
  // Number of queries whose importance sample fell below the ESS floor.
  std::uint64_t degenerate_queries() const { return degenerate_.load(); }

 protected:
  SampleSet do_predict(const PredictionQuery& query) const override;

 private:
  int importance_factor_;
  mutable std::atomic<std::uint64_t> degenerate_{0};
};

// Treats the query as an observation: likelihood weighting with
// importance_factor * k samples, then systematic resampling to k.
std::shared_ptr<const CbpOracle> make_cbp_oracle(std::string tag = "cbp-oracle", int importance_factor = 20);

// Built-in tags: ibp-oracle, cbp-oracle, unconditioned, constant-velocity.
PredictorHandle make_builtin(std::string_view tag);
std::vector<std::string> builtin_tags();

// Draws k robot plans for a scenario; used to replace dropped segments.
using MarginalSampler = std::function<std::vector<RobotPlan>(const Scenario&, int k, const SeedKey&)>;

// Robot marginal of the joint system: k rollout_joint robot trajectories
// under seed.child(i).
std::vector<RobotPlan> sample_robot_marginal(const Scenario& scenario, int k, const SeedKey& seed);

// Plans read from a file (for instance produced by a motion planner),
// grouped by scenario id. Draws uniformly with replacement.
class PlanSetSampler {
 public:
  explicit PlanSetSampler(std::map<std::uint64_t, std::vector<RobotPlan>> plans) : plans_(std::move(plans)) {}

  // CSV with header scenario_id,plan_id,t,s,v; rows of a plan in t order.
  static PlanSetSampler load_csv(const std::string& path);

  std::vector<RobotPlan> operator()(const Scenario& scenario, int k, const SeedKey& seed) const;

 private:
  std::map<std::uint64_t, std::vector<RobotPlan>> plans_;
};

}  // namespace ibp
