#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "ibp/error.hpp"
#include "ibp/inference.hpp"
#include "ibp/predictors.hpp"

using namespace ibp;

namespace {

PredictionQuery toy_query(int k, const RobotPlan& plan, double sigma = 4.0) {
  PredictionQuery q;
  q.scenario.params.sigma = sigma;
  q.robot_future = plan;
  q.k = k;
  q.seed = SeedKey{42, 7, 0, SeedRole::kHumanNoise};
  return q;
}

RobotPlan natural_plan(const Scenario& sc) { return RobotPlan::from_trajectory(rollout_joint(sc, SeedKey{}).robot); }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected ibp::Error");
  return ErrorCode::kIo;
}

class BrokenPredictor final : public Predictor {
 public:
  explicit BrokenPredictor(int mode) : Predictor("broken", CausalClaim::kUnknown), mode_(mode) {}

 protected:
  SampleSet do_predict(const PredictionQuery& q) const override {
    SampleSet out = make_constant_velocity()->predict(q);
    if (mode_ == 0) out.samples.pop_back();
    if (mode_ == 1) out.samples[0].states[2].v = -1.0;
    if (mode_ == 2) out.samples[0].states[0].s += 1.0;
    if (mode_ == 3) throw std::runtime_error("model exploded");
    return out;
  }

 private:
  int mode_;
};

}  // namespace

TEST_CASE("constant velocity closed form") {
  const Scenario sc;
  const auto out = make_constant_velocity()->predict(toy_query(3, plan_accelerate(sc, 5.0, 10.0)));
  REQUIRE(out.size() == 3);
  for (const auto& tr : out.samples)
    for (int t = 0; t <= sc.horizon; ++t) {
      CHECK(tr[t].s == doctest::Approx(15.0 - t * 0.2 * 8.0).epsilon(1e-12));
      CHECK(tr[t].v == 8.0);
    }
}

TEST_CASE("IBP oracle on the natural plan at sigma 0 reproduces the joint rollout") {
  Scenario sc;
  sc.params.sigma = 0.0;
  const auto joint = rollout_joint(sc, SeedKey{});
  const auto out = make_ibp_oracle()->predict(toy_query(4, RobotPlan::from_trajectory(joint.robot), 0.0));
  for (const auto& tr : out.samples) CHECK(tr == joint.human);
}

TEST_CASE("IBP oracle equals interventional sampling under the query seed") {
  const Scenario sc;
  const auto plan = plan_accelerate(sc, 5.0, 10.0);
  const auto q = toy_query(16, plan);
  CHECK(make_ibp_oracle()->predict(q) == interventional_mc(q.scenario, plan, 16, q.seed));
}

TEST_CASE("CBP oracle on the natural plan at sigma 0 equals IBP") {
  Scenario sc;
  sc.params.sigma = 0.0;
  const auto q = toy_query(8, natural_plan(sc), 0.0);
  const auto cbp = make_cbp_oracle()->predict(q);
  CHECK(cbp.uniform());
  CHECK(cbp.samples == make_ibp_oracle()->predict(q).samples);
}

TEST_CASE("CBP oracle: the aggressive plan concentrates samples on yielding humans") {
  const Scenario sc;
  const auto plan = plan_accelerate(sc, 5.0, 10.0);
  const auto q = toy_query(64, plan);
  const auto robot_cross = *first_crossing(plan.states);
  auto not_yield_fraction = [&](const SampleSet& s) {
    int count = 0;
    for (const auto& tr : s.samples) {
      const auto c = first_crossing(tr.states);
      if (c && *c <= robot_cross) ++count;
    }
    return static_cast<double>(count) / s.size();
  };
  const auto cbp = make_cbp_oracle()->predict(q);
  CHECK(cbp.uniform());
  CHECK(not_yield_fraction(cbp) < not_yield_fraction(make_ibp_oracle()->predict(q)));
}

TEST_CASE("prefix independence: IBP yes, CBP measurably no") {
  const Scenario sc;
  const auto plan = plan_accelerate(sc, 5.0, 10.0);
  auto late = plan;
  for (int t = 8; t <= sc.horizon; ++t) {
    late.states[t].v = 2.0;
    if (t < sc.horizon) late.states[t + 1].s = late.states[t].s - sc.params.dt * late.states[t].v;
  }
  const auto a = toy_query(32, plan), b = toy_query(32, late);
  const auto ia = make_ibp_oracle()->predict(a), ib = make_ibp_oracle()->predict(b);
  for (std::size_t i = 0; i < ia.size(); ++i)
    for (int t = 1; t <= 8; ++t) CHECK(ia.samples[i][t] == ib.samples[i][t]);

  const auto ca = make_cbp_oracle()->predict(a), cb = make_cbp_oracle()->predict(b);
  bool early_changed = false;
  for (std::size_t i = 0; i < ca.size(); ++i) early_changed |= ca.samples[i][1] != cb.samples[i][1];
  CHECK(early_changed);
}

TEST_CASE("predictors are deterministic in the query") {
  const Scenario sc;
  const auto q = toy_query(8, plan_accelerate(sc, 5.0, 10.0));
  for (const auto& tag : builtin_tags()) {
    const auto p = make_builtin(tag);
    CHECK(p->tag() == tag);
    CHECK(p->predict(q) == p->predict(q));
  }
  CHECK_THROWS_AS(make_builtin("no-such-predictor"), Error);
}

TEST_CASE("causal claims") {
  CHECK(make_ibp_oracle()->causal_claim() == CausalClaim::kInterventional);
  CHECK(make_cbp_oracle()->causal_claim() == CausalClaim::kConditional);
}

TEST_CASE("unconditioned oracle ignores the query plan") {
  const Scenario sc;
  const auto a = make_unconditioned_oracle()->predict(toy_query(8, plan_accelerate(sc, 5.0, 10.0)));
  const auto b = make_unconditioned_oracle()->predict(toy_query(8, natural_plan(sc)));
  CHECK(a == b);
}

TEST_CASE("robot marginal") {
  Scenario sc;
  const auto plans = sample_robot_marginal(sc, 20, SeedKey{1, 2, 0, SeedRole::kMarginalSample});
  CHECK(plans.size() == 20);
  for (const auto& p : plans) CHECK_NOTHROW(validate_plan(p, sc));
  CHECK(plans == sample_robot_marginal(sc, 20, SeedKey{1, 2, 0, SeedRole::kMarginalSample}));
  sc.params.sigma = 0.0;
  const auto point = sample_robot_marginal(sc, 5, SeedKey{1, 2, 0, SeedRole::kMarginalSample});
  for (const auto& p : point) CHECK(p == point.front());
}

TEST_CASE("query validation") {
  const Scenario sc;
  auto q = toy_query(0, plan_accelerate(sc, 5.0, 10.0));
  CHECK(code_of([&] { validate_query(q); }) == ErrorCode::kInvalidArgument);
  q.k = 2;
  q.robot_future.states.pop_back();
  CHECK(code_of([&] { validate_query(q); }) == ErrorCode::kShape);
}

TEST_CASE("answer validation names the failure") {
  const Scenario sc;
  const auto q = toy_query(3, plan_accelerate(sc, 5.0, 10.0));
  CHECK(code_of([&] { BrokenPredictor(0).predict(q); }) == ErrorCode::kShape);
  CHECK(code_of([&] { BrokenPredictor(1).predict(q); }) == ErrorCode::kInvariantViolation);
  CHECK(code_of([&] { BrokenPredictor(2).predict(q); }) == ErrorCode::kInvariantViolation);
  try {
    BrokenPredictor(3).predict(q);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPredictorFailure);
    CHECK(std::string(e.what()).find("broken") != std::string::npos);
  }
}

TEST_CASE("plan set sampler") {
  const std::string path = "test_predictors_plans.csv";
  {
    std::ofstream f(path);
    f << "scenario_id,plan_id,t,s,v\n";
    for (int plan = 0; plan < 2; ++plan)
      for (int t = 0; t <= 2; ++t) f << "0," << plan << ',' << t << ',' << 15.0 - t * 0.2 * 5.0 << ",5\n";
  }
  const auto sampler = PlanSetSampler::load_csv(path);
  Scenario sc;
  sc.horizon = 2;
  const auto plans = sampler(sc, 6, SeedKey{0, 0, 0, SeedRole::kMarginalSample});
  CHECK(plans.size() == 6);
  for (const auto& p : plans) CHECK_NOTHROW(validate_plan(p, sc));
  CHECK_THROWS_AS(sampler(sc, 6, SeedKey{0, 9, 0, SeedRole::kMarginalSample}), Error);
  std::remove(path.c_str());
}
