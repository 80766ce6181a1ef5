#include "ibp/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include "ibp/error.hpp"
#include "ibp/parallel.hpp"
#include "ibp/rng.hpp"

namespace ibp {

int SegmentScheme::segment_of(int step) const {
  for (int j = 0; j < segments(); ++j) {
    if (step <= cuts[j]) return j;
  }
  fail(ErrorCode::kShape, "step " + std::to_string(step) + " lies beyond the last cut");
}

void SegmentScheme::validate(int horizon) const {
  require(cuts.size() >= 2, ErrorCode::kInvalidArgument, "segment scheme needs at least two segments");
  require(cuts.size() <= 16, ErrorCode::kInvalidArgument, "segment scheme supports at most 16 segments");
  require(cuts.front() > 0, ErrorCode::kInvalidArgument, "first cut must be > 0");
  for (std::size_t i = 1; i < cuts.size(); ++i) {
    require(cuts[i] > cuts[i - 1], ErrorCode::kInvalidArgument, "cuts must be strictly increasing");
  }
  require(cuts.back() == horizon, ErrorCode::kInvalidArgument,
          "last cut " + std::to_string(cuts.back()) + " must equal the horizon " + std::to_string(horizon));
}

SegmentScheme SegmentScheme::equal_split(int horizon, int m) {
  require(m >= 2 && m <= horizon, ErrorCode::kInvalidArgument, "equal_split needs 2 <= m <= horizon");
  SegmentScheme scheme;
  scheme.cuts.clear();
  for (int j = 1; j <= m; ++j) {
    scheme.cuts.push_back(static_cast<int>(std::lround(static_cast<double>(horizon) * j / m)));
  }
  scheme.validate(horizon);
  return scheme;
}

RobotPlan splice_plan(const RobotPlan& truth, const RobotPlan& replacement, SubsetMask kept,
                      const SegmentScheme& scheme, double dt) {
  require(truth.states.size() == replacement.states.size(), ErrorCode::kShape, "spliced plans differ in horizon");
  require(truth.states.front() == replacement.states.front(), ErrorCode::kShape,
          "spliced plans differ in their initial state");
  const int horizon = truth.horizon();
  scheme.validate(horizon);
  RobotPlan out;
  out.states.reserve(truth.states.size());
  out.states.push_back(truth.states.front());
  for (int t = 1; t <= horizon; ++t) {
    const bool from_truth = (kept >> scheme.segment_of(t)) & 1U;
    const AgentState& prev = out.states.back();
    const double v = from_truth ? truth.states[t].v : replacement.states[t].v;
    out.states.push_back({prev.s - dt * prev.v, v});
  }
  return out;
}

std::vector<double> shapley_values(std::span<const double> nu, int m) {
  require(m >= 1 && m <= 16, ErrorCode::kInvalidArgument, "shapley_values supports 1 <= m <= 16");
  const std::size_t lattice = std::size_t{1} << m;
  require(nu.size() == lattice, ErrorCode::kIncompleteLattice,
          "need " + std::to_string(lattice) + " subset values, got " + std::to_string(nu.size()));
  // weight[s] = s! (m - s - 1)! / m!; factorials up to 16! are exact doubles.
  std::vector<double> factorial(m + 1, 1.0);
  for (int i = 1; i <= m; ++i) factorial[i] = factorial[i - 1] * i;
  std::vector<double> weight(m);
  for (int s = 0; s < m; ++s) weight[s] = factorial[s] * factorial[m - s - 1] / factorial[m];
  std::vector<double> phi(m, 0.0);
  for (int i = 0; i < m; ++i) {
    const SubsetMask bit = SubsetMask{1} << i;
    for (SubsetMask s = 0; s < lattice; ++s) {
      if (s & bit) continue;
      phi[i] += weight[std::popcount(s)] * (nu[s | bit] - nu[s]);
    }
  }
  return phi;
}

std::vector<double> shapley_exact(std::span<const SetFunctionEval> lattice, int m, MetricKind metric) {
  require(m >= 1 && m <= 16, ErrorCode::kInvalidArgument, "shapley_exact supports 1 <= m <= 16");
  const std::size_t size = std::size_t{1} << m;
  std::vector<double> nu(size, std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> seen(size, false);
  for (const auto& eval : lattice) {
    require(eval.subset < size, ErrorCode::kIncompleteLattice, "subset mask out of range");
    auto it = eval.values.find(metric);
    require(it != eval.values.end(), ErrorCode::kIncompleteLattice,
            "subset " + std::to_string(eval.subset) + " lacks metric " + std::string(to_string(metric)));
    nu[eval.subset] = it->second;
    seen[eval.subset] = true;
  }
  for (std::size_t s = 0; s < size; ++s) {
    require(seen[s], ErrorCode::kIncompleteLattice, "subset " + std::to_string(s) + " is missing");
  }
  auto phi = shapley_values(nu, m);
  for (auto& x : phi) x = -x;
  return phi;
}

std::vector<DatasetItem> dataset_generate(int n_scenarios, const DatasetRanges& ranges, const IdmParams& params,
                                          int horizon, std::uint64_t seed) {
  require(n_scenarios >= 0, ErrorCode::kInvalidArgument, "n_scenarios must be >= 0");
  require(ranges.s_max >= ranges.s_min && ranges.v_max >= ranges.v_min && ranges.v_min >= 0.0,
          ErrorCode::kInvalidArgument, "dataset ranges must be ordered with v_min >= 0");
  params.validate();
  std::vector<DatasetItem> out;
  out.reserve(n_scenarios);
  for (int i = 0; i < n_scenarios; ++i) {
    const auto id = static_cast<std::uint64_t>(i);
    RandomStream draw(SeedKey{seed, id, 0, SeedRole::kScenarioDraw});
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * draw.uniform(); };
    DatasetItem item;
    item.id = id;
    item.scenario.params = params;
    item.scenario.horizon = horizon;
    item.scenario.human0 = {uniform(ranges.s_min, ranges.s_max), uniform(ranges.v_min, ranges.v_max)};
    item.scenario.robot0 = {uniform(ranges.s_min, ranges.s_max), uniform(ranges.v_min, ranges.v_max)};
    item.scenario.validate();
    auto joint = rollout_joint(item.scenario, SeedKey{seed, id, 0, SeedRole::kHumanNoise});
    item.truth_human = std::move(joint.human);
    item.truth_robot = RobotPlan::from_trajectory(joint.robot);
    out.push_back(std::move(item));
  }
  return out;
}

SetFunctionEval eval_nu(const Predictor& predictor, const DatasetItem& item, SubsetMask subset,
                        const SegmentScheme& scheme, std::span<const RobotPlan> marginal_plans,
                        const SeedKey& predictor_seed, const NuOptions& options) {
  require(!marginal_plans.empty(), ErrorCode::kInvalidArgument, "eval_nu needs at least one marginal plan");
  require(subset < (SubsetMask{1} << scheme.segments()), ErrorCode::kInvalidArgument, "subset is not within the scheme");
  for (auto metric : options.metrics) {
    require(is_attribution_metric(metric), ErrorCode::kInvalidArgument,
            "metric " + std::string(to_string(metric)) + " cannot be attributed");
  }
  const auto prefix = scheme.prefix();
  const double dt = item.scenario.params.dt;

  std::map<MetricKind, double> sums;
  for (auto metric : options.metrics) sums[metric] = 0.0;
  for (std::size_t k = 0; k < marginal_plans.size(); ++k) {
    PredictionQuery query;
    query.scenario = item.scenario;
    query.robot_future = splice_plan(item.truth_robot, marginal_plans[k], subset, scheme, dt);
    query.k = options.samples_per_query;
    query.seed = predictor_seed.child(k);
    SampleSet answer;
    try {
      answer = predictor.predict(query);
    } catch (const Error& e) {
      fail(e.code(), "subset " + std::to_string(subset) + ", query " + std::to_string(k) + ": " + e.what());
    }
    for (auto metric : options.metrics) {
      sums[metric] += evaluate(metric, answer, item.truth_human, prefix, options.kde);
    }
  }
  SetFunctionEval out;
  out.subset = subset;
  out.k = static_cast<int>(marginal_plans.size());
  out.seed = predictor_seed;
  for (auto& [metric, sum] : sums) {
    out.values[metric] = sum / static_cast<double>(marginal_plans.size());
    require(std::isfinite(out.values[metric]), ErrorCode::kNumericBlowup, "set function value is not finite");
  }
  return out;
}

SetFunctionEval eval_nu(const Predictor& predictor, const DatasetItem& item, SubsetMask subset,
                        const SegmentScheme& scheme, int k, const MarginalSampler& sampler,
                        const SeedKey& marginal_seed, const SeedKey& predictor_seed, const NuOptions& options) {
  const auto plans = sampler(item.scenario, k, marginal_seed);
  require(plans.size() == static_cast<std::size_t>(k), ErrorCode::kShape, "marginal sampler returned the wrong count");
  return eval_nu(predictor, item, subset, scheme, plans, predictor_seed, options);
}

std::string_view to_string(Verdict verdict) { return verdict == Verdict::kPass ? "PASS" : "FAIL"; }

std::vector<SegmentStat> segment_stats(const std::vector<std::vector<double>>& values, int m) {
  std::vector<SegmentStat> out(m);
  const auto n = static_cast<double>(values.size());
  if (values.empty()) {
    for (auto& s : out) s.mean = s.std = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  for (int j = 0; j < m; ++j) {
    double acc = 0.0;
    for (const auto& row : values) acc += row[j];
    const double mean = acc / n;
    double sq = 0.0;
    for (const auto& row : values) sq += (row[j] - mean) * (row[j] - mean);
    out[j].mean = mean;
    out[j].std = values.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
  }
  return out;
}

Verdict decide(const std::map<MetricKind, std::vector<SegmentStat>>& stats, const std::vector<MetricKind>& gated,
               double epsilon, std::vector<std::string>* violations) {
  Verdict verdict = Verdict::kPass;
  for (auto metric : gated) {
    auto it = stats.find(metric);
    require(it != stats.end(), ErrorCode::kConfig,
            "gated metric " + std::string(to_string(metric)) + " was not audited");
    for (std::size_t j = 1; j < it->second.size(); ++j) {
      const double mean = it->second[j].mean;
      if (!(mean <= epsilon)) {
        verdict = Verdict::kFail;
        if (violations) {
          std::ostringstream os;
          os << to_string(metric) << " segment " << j + 1 << ": mean " << mean << " > " << epsilon;
          violations->push_back(os.str());
        }
      }
    }
  }
  return verdict;
}

ShapleyReport audit(const PredictorHandle& predictor, std::span<const DatasetItem> dataset,
                    const AuditOptions& options, const MarginalSampler& sampler) {
  require(predictor != nullptr, ErrorCode::kInvalidArgument, "audit needs a predictor");
  require(!dataset.empty(), ErrorCode::kInvalidArgument, "audit needs a nonempty dataset");
  require(options.k >= 1, ErrorCode::kInvalidArgument, "audit k must be >= 1");
  require(!options.metrics.empty(), ErrorCode::kInvalidArgument, "audit needs at least one metric");
  for (auto metric : options.gated) {
    require(std::find(options.metrics.begin(), options.metrics.end(), metric) != options.metrics.end(),
            ErrorCode::kConfig, "gated metric " + std::string(to_string(metric)) + " is not audited");
  }

  const int m = options.scheme.segments();
  const SubsetMask lattice = SubsetMask{1} << m;
  NuOptions nu_options;
  nu_options.metrics = options.metrics;
  nu_options.kde = options.kde;
  const bool has_kde =
      std::find(options.metrics.begin(), options.metrics.end(), MetricKind::kKdeNll) != options.metrics.end();
  nu_options.samples_per_query = has_kde ? options.kde_samples_per_query : options.samples_per_query;

  std::vector<std::optional<ScenarioAttribution>> results(dataset.size());
  std::vector<std::optional<std::string>> errors(dataset.size());
  parallel_for(dataset.size(), options.threads, [&](std::size_t i) {
    const auto& item = dataset[i];
    try {
      options.scheme.validate(item.scenario.horizon);
      const SeedKey marginal_base{options.seed, item.id, 0, SeedRole::kMarginalSample};
      const SeedKey predictor_base{options.seed, item.id, 0, SeedRole::kHumanNoise};
      std::vector<RobotPlan> shared_plans;
      if (options.common_random_numbers) shared_plans = sampler(item.scenario, options.k, marginal_base);

      std::vector<SetFunctionEval> evals;
      evals.reserve(lattice);
      for (SubsetMask s = 0; s < lattice; ++s) {
        if (options.common_random_numbers) {
          evals.push_back(eval_nu(*predictor, item, s, options.scheme, shared_plans, predictor_base, nu_options));
        } else {
          SeedKey marginal_seed = marginal_base;
          SeedKey predictor_seed = predictor_base;
          marginal_seed.trial = predictor_seed.trial = s + 1;
          evals.push_back(eval_nu(*predictor, item, s, options.scheme, options.k, sampler, marginal_seed,
                                  predictor_seed, nu_options));
        }
      }
      ScenarioAttribution attribution;
      attribution.id = item.id;
      for (auto metric : options.metrics) {
        attribution.phi[metric] = shapley_exact(evals, m, metric);
        auto& nu = attribution.nu[metric];
        nu.resize(lattice);
        for (const auto& e : evals) nu[e.subset] = e.values.at(metric);
      }
      results[i] = std::move(attribution);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  ShapleyReport report;
  report.predictor = predictor->tag();
  report.options = options;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (results[i]) {
      report.scenarios.push_back(std::move(*results[i]));
    } else {
      report.failures.push_back({dataset[i].id, errors[i].value_or("unknown failure")});
    }
  }
  for (auto metric : options.metrics) {
    std::vector<std::vector<double>> rows;
    rows.reserve(report.scenarios.size());
    for (const auto& sc : report.scenarios) rows.push_back(sc.phi.at(metric));
    report.stats[metric] = segment_stats(rows, m);
  }
  report.verdict = decide(report.stats, options.gated, options.epsilon, &report.violations);
  if (report.scenarios.empty()) {
    report.verdict = Verdict::kFail;
    report.violations.push_back("no scenario completed");
  }
  return report;
}

}  // namespace ibp
