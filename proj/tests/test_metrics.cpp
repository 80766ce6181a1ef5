#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ibp/error.hpp"
#include "ibp/metrics.hpp"
#include "ibp/rng.hpp"
#include "metric_examples.hpp"

using namespace ibp;

namespace {

Trajectory straight(int horizon, double s0, double v) {
  Trajectory t;
  for (int i = 0; i <= horizon; ++i) t.states.push_back({s0 - 0.2 * v * i, v});
  return t;
}

SampleSet noisy_set(const Trajectory& truth, int k, double spread, RandomStream& rng) {
  SampleSet set;
  for (int i = 0; i < k; ++i) {
    Trajectory t = truth;
    for (std::size_t s = 1; s < t.states.size(); ++s) t.states[s].s += spread * rng.normal();
    set.samples.push_back(t);
  }
  return set;
}

}  // namespace

TEST_CASE("worked examples") {
  for (const auto& ex : metric_examples::all()) {
    INFO(ex.name);
    INFO("actual " << ex.actual << ", expected " << ex.expected);
    CHECK(ex.passed());
  }
}

TEST_CASE("metric names round-trip; only mean forms are attributable") {
  for (auto k : {MetricKind::kAde, MetricKind::kFde, MetricKind::kKdeNll, MetricKind::kMinAde, MetricKind::kMinFde})
    CHECK(metric_from_string(to_string(k)) == k);
  CHECK(is_attribution_metric(MetricKind::kFde));
  CHECK_FALSE(is_attribution_metric(MetricKind::kMinAde));
  CHECK_FALSE(metric_from_string("ade").has_value());
}

TEST_CASE("empty prefix and short samples are shape errors") {
  const auto truth = straight(4, 20.0, 5.0);
  SampleSet set{{truth}, {}};
  CHECK_THROWS_AS(ade(set, truth, HorizonPrefix{0}), Error);
  CHECK_THROWS_AS(fde(set, truth, HorizonPrefix{5}), Error);
}

TEST_CASE("min variants reject weighted sets") {
  const auto truth = straight(4, 20.0, 5.0);
  SampleSet set{{truth, truth}, {1.0, 3.0}};
  CHECK_THROWS_AS(min_variant(MetricKind::kMinAde, set, truth, HorizonPrefix{4}), Error);
  CHECK_THROWS_AS(min_variant(MetricKind::kAde, SampleSet{{truth}, {}}, truth, HorizonPrefix{4}), Error);
}

TEST_CASE("properties on random sample sets") {
  RandomStream rng(SeedKey{31, 0, 0, SeedRole::kHumanNoise});
  for (int rep = 0; rep < 300; ++rep) {
    const int T = 2 + static_cast<int>(rng.below(9));
    const int t1 = 1 + static_cast<int>(rng.below(T));
    const HorizonPrefix prefix{t1};
    const auto truth = straight(T, 10.0 + 20.0 * rng.uniform(), 3.0 + 7.0 * rng.uniform());
    const auto set = noisy_set(truth, 1 + static_cast<int>(rng.below(12)), 0.1 + 3.0 * rng.uniform(), rng);

    const double a = ade(set, truth, prefix), f = fde(set, truth, prefix);
    CHECK(a >= 0.0);
    CHECK(f >= 0.0);
    CHECK(min_variant(MetricKind::kMinAde, set, truth, prefix) <= a + 1e-12);
    CHECK(min_variant(MetricKind::kMinFde, set, truth, prefix) <= f + 1e-12);

    // steps after the prefix are ignored bit-exactly
    auto perturbed = set;
    for (auto& tr : perturbed.samples)
      for (int t = t1 + 1; t <= T; ++t) tr.states[t].s += 100.0 * rng.normal();
    for (auto kind : {MetricKind::kAde, MetricKind::kFde, MetricKind::kKdeNll, MetricKind::kMinAde, MetricKind::kMinFde})
      CHECK(evaluate(kind, perturbed, truth, prefix) == evaluate(kind, set, truth, prefix));
  }
}

TEST_CASE("ADE is zero iff every weighted sample matches the truth on the prefix") {
  const auto truth = straight(6, 25.0, 6.0);
  auto other = truth;
  other.states[2].s += 1.0;
  CHECK(ade(SampleSet{{truth, other}, {1.0, 0.0}}, truth, HorizonPrefix{4}) == 0.0);
  CHECK(ade(SampleSet{{truth, other}, {1.0, 1e-6}}, truth, HorizonPrefix{4}) > 0.0);
}

TEST_CASE("KDE_NLL improves as samples concentrate on the truth at fixed bandwidth") {
  const PositionTrack truth{{0.0, 0.0}, {0.0, 0.0}};
  KdeOptions opt;
  opt.bandwidth_floor = 5.0;  // dominates Scott's width for these small spreads
  double last = -1e300;
  for (double spread : {0.0, 0.25, 0.5, 1.0, 2.0}) {
    const std::vector<PositionTrack> samples{{{0.0, 0.0}, {spread, 0.0}}, {{0.0, 0.0}, {-spread, 0.0}}};
    const double nll = kde_nll(samples, {}, truth, HorizonPrefix{1}, opt);
    CHECK(nll > last);
    last = nll;
  }
}

TEST_CASE("Scott bandwidth") {
  CHECK(scott_bandwidth(std::vector{1.0}, std::vector{1.0}, 1e-3) == 1e-3);
  CHECK(scott_bandwidth(std::vector{2.0, 2.0}, std::vector{1.0, 1.0}, 1e-3) == 1e-3);
  CHECK(scott_bandwidth(std::vector{0.0, 2.0}, std::vector{1.0, 1.0}, 1e-3) ==
        doctest::Approx(std::pow(2.0, -1.0 / 6.0)).epsilon(1e-12));
}
