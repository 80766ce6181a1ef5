#include "ibp/predictors.hpp"

#include <fstream>
#include <sstream>

#include "ibp/error.hpp"
#include "ibp/inference.hpp"
#include "ibp/rng.hpp"

namespace ibp {

std::string_view to_string(CausalClaim claim) {
  switch (claim) {
    case CausalClaim::kInterventional: return "claims-interventional";
    case CausalClaim::kConditional: return "claims-conditional";
    case CausalClaim::kUnknown: return "unknown";
  }
  return "unknown";
}

void validate_query(const PredictionQuery& query) {
  require(query.k >= 1, ErrorCode::kInvalidArgument, "query k must be >= 1");
  query.scenario.validate();
  validate_plan(query.robot_future, query.scenario);
}

void validate_prediction(const PredictionQuery& query, const SampleSet& out) {
  require(out.size() == static_cast<std::size_t>(query.k), ErrorCode::kShape,
          "expected " + std::to_string(query.k) + " trajectories, got " + std::to_string(out.size()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& traj = out.samples[i];
    require(traj.horizon() == query.scenario.horizon, ErrorCode::kShape,
            "trajectory " + std::to_string(i) + " has horizon " + std::to_string(traj.horizon()));
    if (auto bad = first_invalid_state(traj)) {
      fail(ErrorCode::kInvariantViolation,
           "trajectory " + std::to_string(i) + " has an invalid state at step " + std::to_string(*bad));
    }
    require(traj.states.front() == query.scenario.human0, ErrorCode::kInvariantViolation,
            "trajectory " + std::to_string(i) + " does not start at the queried human state");
  }
}

SampleSet Predictor::predict(const PredictionQuery& query) const {
  validate_query(query);
  SampleSet out;
  try {
    out = do_predict(query);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kPredictorFailure:
      case ErrorCode::kTimeout:
      case ErrorCode::kMalformedMessage:
      case ErrorCode::kVersionMismatch:
      case ErrorCode::kShape:
      case ErrorCode::kInvariantViolation:
      case ErrorCode::kDeterminismViolation:
        // keep the code so callers can tell a bad answer from a crash
        fail(e.code(), "[" + tag_ + "] " + std::string(e.what()).substr(to_string(e.code()).size() + 2));
      default:
        fail(ErrorCode::kPredictorFailure, "[" + tag_ + "] " + e.what());
    }
  } catch (const std::exception& e) {
    fail(ErrorCode::kPredictorFailure, "[" + tag_ + "] " + e.what());
  }
  validate_prediction(query, out);
  return out;
}

namespace {

class ConstantVelocity final : public Predictor {
 public:
  using Predictor::Predictor;

 protected:
  SampleSet do_predict(const PredictionQuery& q) const override {
    Trajectory traj;
    const auto h0 = q.scenario.human0;
    for (int t = 0; t <= q.scenario.horizon; ++t) {
      traj.states.push_back({h0.s - t * q.scenario.params.dt * h0.v, h0.v});
    }
    return SampleSet{std::vector<Trajectory>(q.k, traj), {}};
  }
};

class Unconditioned final : public Predictor {
 public:
  using Predictor::Predictor;

 protected:
  SampleSet do_predict(const PredictionQuery& q) const override {
    SampleSet out;
    out.samples.reserve(q.k);
    for (int i = 0; i < q.k; ++i) out.samples.push_back(rollout_joint(q.scenario, q.seed.child(i)).human);
    return out;
  }
};

class IbpOracle final : public Predictor {
 public:
  using Predictor::Predictor;

 protected:
  SampleSet do_predict(const PredictionQuery& q) const override {
    return interventional_mc(q.scenario, q.robot_future, q.k, q.seed);
  }
};

}  // namespace

SampleSet CbpOracle::do_predict(const PredictionQuery& q) const {
  const auto estimate = conditional_lw(q.scenario, q.robot_future, importance_factor_ * q.k, q.seed);
  if (estimate.warning) degenerate_.fetch_add(1);
  return resample_uniform(estimate.samples, q.k, q.seed.with_role(SeedRole::kResample));
}

PredictorHandle make_constant_velocity(std::string tag) {
  return std::make_shared<ConstantVelocity>(std::move(tag), CausalClaim::kInterventional);
}

PredictorHandle make_unconditioned_oracle(std::string tag) {
  return std::make_shared<Unconditioned>(std::move(tag), CausalClaim::kInterventional);
}

PredictorHandle make_ibp_oracle(std::string tag) {
  return std::make_shared<IbpOracle>(std::move(tag), CausalClaim::kInterventional);
}

std::shared_ptr<const CbpOracle> make_cbp_oracle(std::string tag, int importance_factor) {
  require(importance_factor >= 1, ErrorCode::kInvalidArgument, "importance factor must be >= 1");
  return std::make_shared<CbpOracle>(std::move(tag), importance_factor);
}

PredictorHandle make_builtin(std::string_view tag) {
  if (tag == "ibp-oracle") return make_ibp_oracle();
  if (tag == "cbp-oracle") return make_cbp_oracle();
  if (tag == "unconditioned") return make_unconditioned_oracle();
  if (tag == "constant-velocity") return make_constant_velocity();
  fail(ErrorCode::kConfig, "unknown predictor '" + std::string(tag) + "'");
}

std::vector<std::string> builtin_tags() { return {"ibp-oracle", "cbp-oracle", "unconditioned", "constant-velocity"}; }

std::vector<RobotPlan> sample_robot_marginal(const Scenario& scenario, int k, const SeedKey& seed) {
  std::vector<RobotPlan> plans;
  plans.reserve(k);
  for (int i = 0; i < k; ++i) plans.push_back(RobotPlan::from_trajectory(rollout_joint(scenario, seed.child(i)).robot));
  return plans;
}

PlanSetSampler PlanSetSampler::load_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open plan set '" + path + "'");
  std::string line;
  std::getline(in, line);
  require(line == "scenario_id,plan_id,t,s,v", ErrorCode::kConfig,
          "plan set '" + path + "' must start with header scenario_id,plan_id,t,s,v");
  std::map<std::uint64_t, std::map<std::uint64_t, RobotPlan>> grouped;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::uint64_t scenario_id = 0;
    std::uint64_t plan_id = 0;
    int t = 0;
    AgentState st;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    row >> scenario_id >> c1 >> plan_id >> c2 >> t >> c3 >> st.s >> c4 >> st.v;
    require(row && c1 == ',' && c2 == ',' && c3 == ',' && c4 == ',', ErrorCode::kConfig,
            "plan set '" + path + "' line " + std::to_string(line_no) + " is malformed");
    auto& plan = grouped[scenario_id][plan_id];
    require(t == plan.horizon() + 1, ErrorCode::kConfig,
            "plan set '" + path + "' line " + std::to_string(line_no) + ": steps must be consecutive from 0");
    plan.states.push_back(st);
  }
  std::map<std::uint64_t, std::vector<RobotPlan>> plans;
  for (auto& [sid, by_id] : grouped) {
    for (auto& [pid, plan] : by_id) plans[sid].push_back(std::move(plan));
  }
  return PlanSetSampler(std::move(plans));
}

std::vector<RobotPlan> PlanSetSampler::operator()(const Scenario& scenario, int k, const SeedKey& seed) const {
  auto it = plans_.find(seed.scenario_id);
  require(it != plans_.end() && !it->second.empty(), ErrorCode::kConfig,
          "plan set has no plans for scenario " + std::to_string(seed.scenario_id));
  for (const auto& plan : it->second) validate_plan(plan, scenario);
  RandomStream stream(seed);
  std::vector<RobotPlan> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back(it->second[stream.below(it->second.size())]);
  return out;
}

}  // namespace ibp
