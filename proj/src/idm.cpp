#include "ibp/idm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ibp/error.hpp"
#include "ibp/rng.hpp"

namespace ibp {
namespace {

constexpr double kMinYieldGap = 0.1;

[[noreturn]] void blowup(const AgentState& state, double target, const IdmParams& params, double omega) {
  std::ostringstream os;
  os.precision(17);
  os << "non-finite IDM update (s=" << state.s << ", v=" << state.v << ", target=" << target
     << ", omega=" << omega << ", dt=" << params.dt << ")";
  fail(ErrorCode::kNumericBlowup, os.str());
}

}  // namespace

double position_residual(const std::vector<AgentState>& states, double dt) {
  double worst = 0.0;
  for (std::size_t t = 0; t + 1 < states.size(); ++t) {
    const double expected = states[t].s - dt * states[t].v;
    worst = std::max(worst, std::abs(states[t + 1].s - expected));
  }
  return worst;
}

void validate_plan(const RobotPlan& plan, const Scenario& scenario) {
  require(plan.horizon() == scenario.horizon, ErrorCode::kShape,
          "plan horizon " + std::to_string(plan.horizon()) + " differs from scenario horizon " +
              std::to_string(scenario.horizon));
  require(plan.states.front() == scenario.robot0, ErrorCode::kShape, "plan does not start at the scenario's robot state");
  for (std::size_t t = 0; t < plan.states.size(); ++t) {
    require(is_valid(plan.states[t]), ErrorCode::kShape, "plan state " + std::to_string(t) + " is invalid");
  }
  require(position_residual(plan.states, scenario.params.dt) <= kPlanPositionTolerance, ErrorCode::kShape,
          "plan positions are inconsistent with its velocities");
}

double time_headway(const AgentState& state) {
  if (state.s <= 0.0) return 0.0;
  if (state.v == 0.0) return std::numeric_limits<double>::infinity();
  return state.s / state.v;
}

RightOfWay right_of_way(const AgentState& human, const AgentState& robot) {
  return time_headway(robot) < time_headway(human) ? RightOfWay::kRobot : RightOfWay::kHuman;
}

double target_offset(const AgentState& /*self*/, const AgentState& other, bool other_has_right_of_way,
                     const IdmParams& params) {
  if (other_has_right_of_way && other.s > 0.0) return 0.0;
  return params.far_target;
}

double step_mean_velocity(const AgentState& state, double target, const IdmParams& p) {
  const double v = state.v;
  const double dv = v - p.v0;
  const double desired_gap = p.s0 + std::max(0.0, v * p.T + v * dv / (2.0 * std::sqrt(p.a * p.b)));
  double gap = state.s - target;
  if (target == 0.0 && gap < kMinYieldGap) gap = kMinYieldGap;
  if (!(gap > 0.0)) blowup(state, target, p, 0.0);
  const double ratio = desired_gap / gap;
  const double accel = p.a * (1.0 - std::pow(v / p.v0, p.delta) - ratio * ratio);
  const double mean = v + p.dt * accel;
  if (!std::isfinite(mean)) blowup(state, target, p, 0.0);
  return mean;
}

AgentState idm_step(const AgentState& state, double target, const IdmParams& params, double omega) {
  const double v_next = step_mean_velocity(state, target, params) + params.dt * omega;
  if (!std::isfinite(v_next)) blowup(state, target, params, omega);
  return {state.s - params.dt * state.v, std::max(0.0, v_next)};
}

Targets compute_targets(const AgentState& human, const AgentState& robot, const IdmParams& params) {
  Targets out;
  out.owner = right_of_way(human, robot);
  out.human = target_offset(human, robot, out.owner == RightOfWay::kRobot, params);
  out.robot = target_offset(robot, human, out.owner == RightOfWay::kHuman, params);
  return out;
}

JointRollout rollout_joint(const Scenario& scenario, const SeedKey& key) {
  const auto& p = scenario.params;
  RandomStream human_noise(key.with_role(SeedRole::kHumanNoise));
  RandomStream robot_noise(key.with_role(SeedRole::kRobotNoise));
  JointRollout out;
  out.human.states.reserve(scenario.horizon + 1);
  out.robot.states.reserve(scenario.horizon + 1);
  out.human.states.push_back(scenario.human0);
  out.robot.states.push_back(scenario.robot0);
  for (int t = 0; t < scenario.horizon; ++t) {
    const AgentState& h = out.human.states.back();
    const AgentState& r = out.robot.states.back();
    const Targets targets = compute_targets(h, r, p);
    const double omega_h = p.sigma * human_noise.normal();
    const double omega_r = p.sigma * robot_noise.normal();
    const AgentState h_next = idm_step(h, targets.human, p, omega_h);
    const AgentState r_next = idm_step(r, targets.robot, p, omega_r);
    out.human.states.push_back(h_next);
    out.robot.states.push_back(r_next);
  }
  return out;
}

Trajectory rollout_intervened(const Scenario& scenario, const RobotPlan& plan, const SeedKey& key) {
  require(plan.horizon() == scenario.horizon, ErrorCode::kShape, "plan horizon differs from scenario horizon");
  require(plan.states.front() == scenario.robot0, ErrorCode::kShape, "plan does not start at the scenario's robot state");
  const auto& p = scenario.params;
  RandomStream human_noise(key.with_role(SeedRole::kHumanNoise));
  Trajectory human;
  human.states.reserve(scenario.horizon + 1);
  human.states.push_back(scenario.human0);
  for (int t = 0; t < scenario.horizon; ++t) {
    const AgentState& h = human.states.back();
    const AgentState& r = plan.states[t];
    const double target = target_offset(h, r, right_of_way(h, r) == RightOfWay::kRobot, p);
    const double omega = p.sigma * human_noise.normal();
    human.states.push_back(idm_step(h, target, p, omega));
  }
  return human;
}

RobotPlan plan_accelerate(const Scenario& scenario, double accel, double v_max) {
  require(accel > 0.0, ErrorCode::kInvalidArgument, "plan acceleration must be > 0");
  require(v_max >= scenario.robot0.v, ErrorCode::kInvalidArgument, "v_max must be >= the robot's initial speed");
  const double dt = scenario.params.dt;
  RobotPlan plan;
  plan.states.reserve(scenario.horizon + 1);
  plan.states.push_back(scenario.robot0);
  for (int t = 0; t < scenario.horizon; ++t) {
    const AgentState& cur = plan.states.back();
    plan.states.push_back({cur.s - dt * cur.v, std::min(v_max, cur.v + dt * accel)});
  }
  return plan;
}

Vec2 robot_position(double s, double geometry) { return {s * std::cos(geometry), s * std::sin(geometry)}; }

double distance_between(const AgentState& human, const AgentState& robot, double geometry) {
  const Vec2 h = human_position(human.s);
  const Vec2 r = robot_position(robot.s, geometry);
  return std::hypot(h.x - r.x, h.y - r.y);
}

namespace {

double min_distance_states(const std::vector<AgentState>& human, const std::vector<AgentState>& robot,
                           double geometry) {
  require(human.size() == robot.size(), ErrorCode::kShape, "min_distance needs equal horizons");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < human.size(); ++t) {
    best = std::min(best, distance_between(human[t], robot[t], geometry));
  }
  return best;
}

}  // namespace

double min_distance(const Trajectory& human, const Trajectory& robot, double geometry) {
  return min_distance_states(human.states, robot.states, geometry);
}

double min_distance(const Trajectory& human, const RobotPlan& robot, double geometry) {
  return min_distance_states(human.states, robot.states, geometry);
}

std::optional<int> first_crossing(const std::vector<AgentState>& states) {
  for (std::size_t t = 0; t < states.size(); ++t) {
    if (states[t].s <= 0.0) return static_cast<int>(t);
  }
  return std::nullopt;
}

}  // namespace ibp
