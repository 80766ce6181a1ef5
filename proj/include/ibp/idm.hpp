#pragma once

#include <optional>

#include "ibp/core.hpp"

namespace ibp {

enum class RightOfWay { kHuman, kRobot };

// The robot's states for t = 0 ... horizon. Positions must follow from the
// velocities: s[t+1] = s[t] - dt * v[t].
struct RobotPlan {
  std::vector<AgentState> states;

  int horizon() const { return static_cast<int>(states.size()) - 1; }
  Trajectory as_trajectory() const { return Trajectory{states}; }
  static RobotPlan from_trajectory(const Trajectory& t) { return RobotPlan{t.states}; }

  bool operator==(const RobotPlan&) const = default;
};

inline constexpr double kPlanPositionTolerance = 1e-9;

// Largest position-consistency residual |s[t+1] - (s[t] - dt v[t])| over the plan.
double position_residual(const std::vector<AgentState>& states, double dt);

// Throws kShape unless the plan fits `scenario` (horizon, initial state,
// position consistency, valid states).
void validate_plan(const RobotPlan& plan, const Scenario& scenario);

// max(s / v, 0); +inf for a stopped car still before the point.
double time_headway(const AgentState& state);

// Strictly smaller headway wins; ties go to the human.
RightOfWay right_of_way(const AgentState& human, const AgentState& robot);

// Target position for `self`: the collision point when `other` holds the
// right-of-way and has not yet reached the point, otherwise far_target.
double target_offset(const AgentState& self, const AgentState& other, bool other_has_right_of_way,
                     const IdmParams& params);

// Deterministic part of the next velocity (omega = 0), before the clamp at 0.
double step_mean_velocity(const AgentState& state, double target, const IdmParams& params);

// One explicit-Euler IDM update with acceleration noise `omega`.
AgentState idm_step(const AgentState& state, double target, const IdmParams& params, double omega);

// Targets for both agents given the current joint state.
struct Targets {
  double human = 0.0;
  double robot = 0.0;
  RightOfWay owner = RightOfWay::kHuman;
};
Targets compute_targets(const AgentState& human, const AgentState& robot, const IdmParams& params);

struct JointRollout {
  Trajectory human;
  Trajectory robot;
};

// Both cars follow the IDM and react to each other. Noise comes from
// key.with_role(kHumanNoise) and key.with_role(kRobotNoise).
JointRollout rollout_joint(const Scenario& scenario, const SeedKey& key);

// The robot follows `plan` regardless of the human; only the human reacts.
// Human noise comes from key.with_role(kHumanNoise).
Trajectory rollout_intervened(const Scenario& scenario, const RobotPlan& plan, const SeedKey& key);

// Accelerate at `accel` until `v_max`, then hold speed.
RobotPlan plan_accelerate(const Scenario& scenario, double accel, double v_max);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Approach paths meet at the origin. The human drives along +x towards the
// origin; the robot path makes `geometry` radians with it.
inline Vec2 human_position(double s) { return {s, 0.0}; }
Vec2 robot_position(double s, double geometry);

double distance_between(const AgentState& human, const AgentState& robot, double geometry);

double min_distance(const Trajectory& human, const Trajectory& robot, double geometry);
double min_distance(const Trajectory& human, const RobotPlan& robot, double geometry);

// First step with s <= 0, if the car reaches the point within the horizon.
std::optional<int> first_crossing(const std::vector<AgentState>& states);

}  // namespace ibp
