#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ibp/error.hpp"
#include "ibp/inference.hpp"
#include "oracles.hpp"

using namespace ibp;

namespace {

Scenario short_scenario(int horizon, double sh, double vh, double sr, double vr) {
  Scenario sc;
  sc.human0 = {sh, vh};
  sc.robot0 = {sr, vr};
  sc.horizon = horizon;
  return sc;
}

// Evidence from a natural robot rollout of the same scenario.
RobotPlan natural_evidence(const Scenario& sc, std::uint64_t trial) {
  return RobotPlan::from_trajectory(rollout_joint(sc, SeedKey{77, 0, trial, SeedRole::kHumanNoise}).robot);
}

void check_against_quadrature(const Scenario& sc, const RobotPlan& evidence, int n) {
  const auto est = conditional_lw(sc, evidence, n, SeedKey{5, 1, 0, SeedRole::kHumanNoise});
  std::vector<double> s_final, v_first;
  for (const auto& tr : est.samples.samples) {
    s_final.push_back(tr[sc.horizon].s);
    v_first.push_back(tr[1].v);
  }
  const auto q = oracle::lw_quadrature(sc.human0, evidence.states, sc.params, sc.horizon, 200001);
  const auto es = oracle::weighted_estimate(s_final, est.samples.weights);
  const auto ev = oracle::weighted_estimate(v_first, est.samples.weights);
  CHECK(std::abs(es.mean - q.s_final.mean) <= std::max(3.0 * es.mean_se, 1e-9));
  CHECK(std::abs(es.variance - q.s_final.variance) <= std::max(3.0 * es.variance_se, 1e-9));
  CHECK(std::abs(ev.mean - q.v_first.mean) <= 3.0 * ev.mean_se);
  CHECK(std::abs(ev.variance - q.v_first.variance) <= 3.0 * ev.variance_se);
}

}  // namespace

TEST_CASE("conditional_lw at horizon 1: the evidence carries no information") {
  const Scenario sc = short_scenario(1, 15.0, 8.0, 15.0, 5.0);
  const auto est = conditional_lw(sc, natural_evidence(sc, 0), 500, SeedKey{1, 0, 0, SeedRole::kHumanNoise});
  CHECK(est.samples.uniform());
  CHECK(est.ess == doctest::Approx(500.0));
  for (const auto& tr : est.samples.samples) CHECK(tr[1].s == 15.0 - 0.2 * 8.0);
  check_against_quadrature(sc, natural_evidence(sc, 0), 20000);
}

TEST_CASE("conditional_lw at horizon 2 matches the quadrature oracle") {
  // the two cars are close in headway, so the step-1 right-of-way depends on the human's first noise draw
  const Scenario sc = short_scenario(2, 12.0, 6.0, 12.0, 5.6);
  for (std::uint64_t trial = 0; trial < 3; ++trial) check_against_quadrature(sc, natural_evidence(sc, trial), 40000);
}

TEST_CASE("unweighted likelihood weighting equals interventional sampling") {
  const Scenario sc;
  const auto plan = plan_accelerate(sc, 5.0, 10.0);
  const SeedKey seed{3, 4, 0, SeedRole::kHumanNoise};
  const auto est = conditional_lw(sc, plan, 300, seed);
  const auto mc = interventional_mc(sc, plan, 300, seed);
  CHECK(est.samples.samples == mc.samples);
  CHECK(mc.uniform());
  CHECK(mc == interventional_mc(sc, plan, 300, seed));
}

TEST_CASE("sigma 0: interventional samples are identical, natural plan gives equal distributions") {
  Scenario sc;
  sc.params.sigma = 0.0;
  const auto plan = RobotPlan::from_trajectory(rollout_joint(sc, SeedKey{}).robot);
  const auto mc = interventional_mc(sc, plan, 20, SeedKey{8, 0, 0, SeedRole::kHumanNoise});
  for (const auto& tr : mc.samples) CHECK(tr == mc.samples.front());

  CompareOptions opt;
  opt.n_samples = 50;
  const auto cmp = compare(sc, plan, opt, SeedKey{8, 0, 0, SeedRole::kHumanNoise});
  for (std::size_t t = 0; t < cmp.conditional.position.size(); ++t)
    CHECK(cmp.conditional.position[t].masses == cmp.interventional.position[t].masses);
  CHECK(cmp.conditional.collision_probability == cmp.interventional.collision_probability);
  for (std::size_t t = 0; t < cmp.conditional.mean_position.size(); ++t)
    CHECK(cmp.conditional.mean_position[t] == doctest::Approx(cmp.interventional.mean_position[t]).epsilon(1e-12));
}

TEST_CASE("sigma 0 with off-manifold evidence is a zero-weight error") {
  Scenario sc;
  sc.params.sigma = 0.0;
  const auto plan = plan_accelerate(sc, 5.0, 10.0);
  try {
    conditional_lw(sc, plan, 10, SeedKey{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroWeightEvidence);
  }
}

TEST_CASE("inconsistent evidence positions are rejected") {
  const Scenario sc;
  auto plan = plan_accelerate(sc, 5.0, 10.0);
  plan.states[4].s += 1.0;
  CHECK_THROWS_AS(conditional_lw(sc, plan, 10, SeedKey{}), Error);
}

TEST_CASE("large sigma makes natural evidence nearly uninformative") {
  Scenario sc;
  sc.params.sigma = 400.0;
  const auto est = conditional_lw(sc, natural_evidence(sc, 1), 2000, SeedKey{2, 0, 0, SeedRole::kHumanNoise});
  CHECK(est.ess > 0.9 * 2000);
  CHECK_FALSE(est.warning.has_value());
}

TEST_CASE("aggressive plan: low ESS raises a warning, weights stay finite") {
  const Scenario sc;
  const auto plan = plan_accelerate(sc, 5.0, 10.0);
  const auto est = conditional_lw(sc, plan, 2000, SeedKey{1, 0, 0, SeedRole::kHumanNoise}, 1e6);
  REQUIRE(est.warning.has_value());
  for (double w : est.samples.weights) CHECK(std::isfinite(w));
  double total = 0.0;
  for (double w : est.samples.weights) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("summaries conserve histogram mass") {
  const Scenario sc;
  CompareOptions opt;
  opt.n_samples = 2000;
  const auto cmp = compare(sc, plan_accelerate(sc, 5.0, 10.0), opt, SeedKey{4, 0, 0, SeedRole::kHumanNoise});
  for (const auto* s : {&cmp.conditional, &cmp.interventional}) {
    CHECK(s->position.size() == static_cast<std::size_t>(sc.horizon));
    for (const auto& h : s->position) CHECK(std::abs(h.in_range() + h.below + h.above - 1.0) <= 1e-12);
    CHECK(std::abs(s->min_distance.in_range() + s->min_distance.below + s->min_distance.above - 1.0) <= 1e-12);
    CHECK(s->mean_position.size() == static_cast<std::size_t>(sc.horizon + 1));
  }
}

TEST_CASE("resample_uniform yields equal weights and existing trajectories") {
  const Scenario sc;
  const auto est = conditional_lw(sc, plan_accelerate(sc, 5.0, 10.0), 400, SeedKey{6, 0, 0, SeedRole::kHumanNoise});
  const auto r = resample_uniform(est.samples, 50, SeedKey{6, 0, 0, SeedRole::kResample});
  CHECK(r.size() == 50);
  CHECK(r.uniform());
  for (const auto& tr : r.samples)
    CHECK(std::find(est.samples.samples.begin(), est.samples.samples.end(), tr) != est.samples.samples.end());
  CHECK(r == resample_uniform(est.samples, 50, SeedKey{6, 0, 0, SeedRole::kResample}));
}
