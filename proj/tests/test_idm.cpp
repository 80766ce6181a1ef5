#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "ibp/error.hpp"
#include "ibp/idm.hpp"
#include "ibp/rng.hpp"
#include "oracles.hpp"

using namespace ibp;

namespace {

const IdmParams kDefaults{};

Scenario noiseless() {
  Scenario s;
  s.params.sigma = 0.0;
  return s;
}

// Random plan that keeps position consistency.
RobotPlan random_plan(const Scenario& sc, RandomStream& rng) {
  RobotPlan p{{sc.robot0}};
  for (int t = 0; t < sc.horizon; ++t) {
    const auto& last = p.states.back();
    p.states.push_back({last.s - sc.params.dt * last.v, std::max(0.0, last.v + 2.0 * rng.normal())});
  }
  return p;
}

Scenario random_scenario(RandomStream& rng) {
  Scenario sc;
  sc.human0 = {10.0 + 20.0 * rng.uniform(), 3.0 + 7.0 * rng.uniform()};
  sc.robot0 = {10.0 + 20.0 * rng.uniform(), 3.0 + 7.0 * rng.uniform()};
  sc.horizon = 2 + static_cast<int>(rng.below(12));
  return sc;
}

}  // namespace

TEST_CASE("time_headway examples") {
  CHECK(time_headway({15.0, 8.0}) == 1.875);
  CHECK(time_headway({-1.0, 5.0}) == 0.0);
  CHECK(time_headway({10.0, 0.0}) == std::numeric_limits<double>::infinity());
}

TEST_CASE("right_of_way examples") {
  CHECK(right_of_way({15.0, 8.0}, {15.0, 5.0}) == RightOfWay::kHuman);
  CHECK(right_of_way({12.0, 6.0}, {12.0, 6.0}) == RightOfWay::kHuman);
  CHECK(right_of_way({-0.5, 6.0}, {3.0, 9.0}) == RightOfWay::kHuman);
  CHECK(right_of_way({15.0, 5.0}, {15.0, 8.0}) == RightOfWay::kRobot);
}

TEST_CASE("target_offset examples") {
  const AgentState self{10.0, 5.0};
  CHECK(target_offset(self, {12.0, 4.0}, true, kDefaults) == 0.0);
  CHECK(target_offset(self, {12.0, 4.0}, false, kDefaults) == kDefaults.far_target);
  CHECK(target_offset(self, {-3.0, 4.0}, true, kDefaults) == kDefaults.far_target);
}

TEST_CASE("idm_step examples") {
  const double v = idm_step({15.0, 10.0}, kDefaults.far_target, kDefaults, 0.0).v;
  const double expected = 10.0 - kDefaults.dt * kDefaults.a * std::pow(24.0 / 10015.0, 2.0);
  CHECK(v == doctest::Approx(expected).epsilon(1e-14));
  CHECK(std::abs(v - 10.0) < 1e-5);

  const double from_rest = idm_step({15.0, 0.0}, kDefaults.far_target, kDefaults, 0.0).v;
  CHECK(from_rest == doctest::Approx(kDefaults.dt * kDefaults.a * (1.0 - std::pow(4.0 / 10015.0, 2.0))).epsilon(1e-14));
  CHECK(from_rest > 0.0);

  CHECK(idm_step({15.0, 8.0}, 0.0, kDefaults, -100.0).v == 0.0);
  CHECK(idm_step({15.0, 8.0}, 0.0, kDefaults, 0.0).s == 15.0 - 0.2 * 8.0);
}

TEST_CASE("step_mean_velocity matches an independent formula evaluation") {
  CHECK(step_mean_velocity({15.0, 8.0}, 0.0, kDefaults) == doctest::Approx(oracle::idm_mean(15.0, 8.0, 0.0, kDefaults)).epsilon(1e-13));
  CHECK(step_mean_velocity({15.0, 10.0}, kDefaults.far_target, kDefaults) == doctest::Approx(10.0).epsilon(1e-6));

  RandomStream rng(SeedKey{9, 0, 0, SeedRole::kHumanNoise});
  for (int i = 0; i < 1000; ++i) {
    const AgentState x{-5.0 + 40.0 * rng.uniform(), 12.0 * rng.uniform()};
    const double d = rng.uniform() < 0.5 ? 0.0 : kDefaults.far_target;
    if (d == 0.0 && x.s <= 0.0) continue;
    const double m = step_mean_velocity(x, d, kDefaults);
    CHECK(m == doctest::Approx(oracle::idm_mean(x.s, x.v, d, kDefaults)).epsilon(1e-12));
    CHECK(idm_step(x, d, kDefaults, 0.0).v == std::max(0.0, m));
  }
}

TEST_CASE("gap is clamped near the collision point") {
  const double v = step_mean_velocity({0.05, 3.0}, 0.0, kDefaults);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(oracle::idm_mean(0.05, 3.0, 0.0, kDefaults)));
}

TEST_CASE("rollout_joint at sigma 0 matches a step-through of the model") {
  const Scenario sc = noiseless();
  const auto r = rollout_joint(sc, SeedKey{1, 0, 0, SeedRole::kHumanNoise});
  const auto ref = oracle::joint_noiseless({15.0, 8.0, 15.0, 5.0}, sc.horizon, sc.params);
  REQUIRE(r.human.horizon() == sc.horizon);
  for (int t = 0; t <= sc.horizon; ++t) {
    CHECK(r.human[t].s == doctest::Approx(ref[t].sh).epsilon(1e-12));
    CHECK(r.human[t].v == doctest::Approx(ref[t].vh).epsilon(1e-12));
    CHECK(r.robot[t].s == doctest::Approx(ref[t].sr).epsilon(1e-12));
    CHECK(r.robot[t].v == doctest::Approx(ref[t].vr).epsilon(1e-12));
  }
  // the slower robot yields: its headway 3.0 loses to the human's 1.875
  CHECK(compute_targets(sc.human0, sc.robot0, sc.params).robot == 0.0);
  CHECK(first_crossing(r.human.states).value_or(99) < first_crossing(r.robot.states).value_or(100));

  double ref_min = std::numeric_limits<double>::infinity();
  for (const auto& x : ref) ref_min = std::min(ref_min, std::hypot(x.sh, x.sr));
  CHECK(min_distance(r.human, r.robot, sc.geometry) == doctest::Approx(ref_min).epsilon(1e-12));

  const auto again = rollout_joint(sc, SeedKey{99, 3, 4, SeedRole::kHumanNoise});
  CHECK(again.human == r.human);
  CHECK(again.robot == r.robot);
}

TEST_CASE("rollout_joint is deterministic per key") {
  const Scenario sc;
  const SeedKey key{7, 2, 5, SeedRole::kHumanNoise};
  const auto a = rollout_joint(sc, key);
  const auto b = rollout_joint(sc, key);
  CHECK(a.human == b.human);
  CHECK(a.robot == b.robot);
  CHECK(rollout_joint(sc, SeedKey{7, 2, 6, SeedRole::kHumanNoise}).human != a.human);
}

TEST_CASE("intervening with the natural action changes nothing at sigma 0") {
  const Scenario sc = noiseless();
  const auto joint = rollout_joint(sc, SeedKey{});
  const auto human = rollout_intervened(sc, RobotPlan::from_trajectory(joint.robot), SeedKey{5, 0, 0, SeedRole::kHumanNoise});
  CHECK(human == joint.human);
}

TEST_CASE("rollout_intervened reads robot states from the plan only") {
  Scenario sc;
  sc.human0 = {15.0, 8.0};
  const auto plan = plan_accelerate(sc, 5.0, 10.0);
  const auto h = rollout_intervened(sc, plan, SeedKey{3, 0, 0, SeedRole::kHumanNoise});
  const auto joint = rollout_joint(sc, SeedKey{3, 0, 0, SeedRole::kHumanNoise});
  CHECK(h[0] == joint.human[0]);
  CHECK(h.horizon() == sc.horizon);
}

TEST_CASE("aggressive plan: some human trajectories pass before the robot") {
  const Scenario sc;
  const auto plan = plan_accelerate(sc, 5.0, 10.0);
  const auto robot_cross = first_crossing(plan.states);
  int human_first = 0;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const auto h = rollout_intervened(sc, plan, SeedKey{1, 0, i, SeedRole::kHumanNoise});
    const auto hc = first_crossing(h.states);
    if (hc && (!robot_cross || *hc <= *robot_cross)) ++human_first;
  }
  CHECK(human_first > 0);
}

TEST_CASE("plan_accelerate examples") {
  const Scenario sc;
  const auto plan = plan_accelerate(sc, 5.0, 10.0);
  REQUIRE(plan.horizon() == 10);
  const double v[] = {5, 6, 7, 8, 9, 10, 10, 10, 10, 10, 10};
  for (int t = 0; t <= 10; ++t) CHECK(plan.states[t].v == doctest::Approx(v[t]).epsilon(1e-12));
  CHECK(plan.states[1].s == 14.0);
  CHECK(position_residual(plan.states, sc.params.dt) <= kPlanPositionTolerance);

  Scenario still = sc;
  still.robot0.v = 10.0;
  const auto flat = plan_accelerate(still, 5.0, 10.0);
  for (const auto& x : flat.states) CHECK(x.v == 10.0);
}

TEST_CASE("validate_plan rejects mismatches") {
  const Scenario sc;
  auto plan = plan_accelerate(sc, 5.0, 10.0);
  CHECK_NOTHROW(validate_plan(plan, sc));
  auto shorter = plan;
  shorter.states.pop_back();
  CHECK_THROWS_AS(validate_plan(shorter, sc), Error);
  auto moved = plan;
  moved.states[3].s += 0.5;
  CHECK_THROWS_AS(validate_plan(moved, sc), Error);
  auto wrong_start = plan;
  wrong_start.states[0].v = 4.0;
  CHECK_THROWS_AS(validate_plan(wrong_start, sc), Error);
  CHECK_THROWS_AS(rollout_intervened(sc, shorter, SeedKey{}), Error);
}

TEST_CASE("min_distance examples") {
  Trajectory h{{{3.0, 0.0}, {3.0, 0.0}}};
  Trajectory r{{{4.0, 0.0}, {4.0, 0.0}}};
  CHECK(min_distance(h, r, std::numbers::pi / 2.0) == doctest::Approx(5.0).epsilon(1e-12));
  Trajectory h0{{{1.0, 5.0}, {0.0, 5.0}}};
  Trajectory r0{{{2.0, 5.0}, {0.0, 5.0}}};
  CHECK(min_distance(h0, r0, std::numbers::pi / 2.0) == 0.0);
  // at pi the cars approach the point from opposite sides
  CHECK(distance_between({3.0, 0.0}, {4.0, 0.0}, std::numbers::pi) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("temporal independence of intervention") {
  RandomStream rng(SeedKey{21, 0, 0, SeedRole::kScenarioDraw});
  for (int rep = 0; rep < 200; ++rep) {
    const Scenario sc = random_scenario(rng);
    const int k = 1 + static_cast<int>(rng.below(sc.horizon));
    auto a = random_plan(sc, rng);
    auto b = random_plan(sc, rng);
    for (int t = 0; t <= k; ++t) b.states[t] = a.states[t];
    for (int t = k; t < sc.horizon; ++t) b.states[t + 1].s = b.states[t].s - sc.params.dt * b.states[t].v;
    const SeedKey key{rng.below(1000), rng.below(1000), rng.below(1000), SeedRole::kHumanNoise};
    const auto ha = rollout_intervened(sc, a, key);
    const auto hb = rollout_intervened(sc, b, key);
    for (int t = 1; t <= k; ++t) CHECK(ha[t] == hb[t]);
  }
}

TEST_CASE("rollout invariants: nonnegative speed and position consistency") {
  RandomStream rng(SeedKey{22, 0, 0, SeedRole::kScenarioDraw});
  for (std::uint64_t rep = 0; rep < 300; ++rep) {
    Scenario sc = random_scenario(rng);
    sc.params.sigma = 8.0 * rng.uniform();
    const auto r = rollout_joint(sc, SeedKey{rep, 0, 0, SeedRole::kHumanNoise});
    for (const auto* traj : {&r.human, &r.robot}) {
      CHECK_FALSE(first_invalid_state(*traj).has_value());
      CHECK(position_residual(traj->states, sc.params.dt) <= 1e-9);
    }
    const auto h = rollout_intervened(sc, random_plan(sc, rng), SeedKey{rep, 1, 0, SeedRole::kHumanNoise});
    CHECK_FALSE(first_invalid_state(h).has_value());
    CHECK(position_residual(h.states, sc.params.dt) <= 1e-9);
  }
}

TEST_CASE("sigma 0 rollouts are seed-independent") {
  RandomStream rng(SeedKey{23, 0, 0, SeedRole::kScenarioDraw});
  for (int rep = 0; rep < 50; ++rep) {
    Scenario sc = random_scenario(rng);
    sc.params.sigma = 0.0;
    const auto a = rollout_joint(sc, SeedKey{rng.below(100), 0, 0, SeedRole::kHumanNoise});
    const auto b = rollout_joint(sc, SeedKey{rng.below(100) + 100, 0, 0, SeedRole::kHumanNoise});
    CHECK(a.human == b.human);
    CHECK(a.robot == b.robot);
  }
}
