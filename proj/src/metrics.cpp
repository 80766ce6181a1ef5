#include "ibp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ibp/error.hpp"
#include "ibp/stats.hpp"

namespace ibp {
namespace {

void check_inputs(std::span<const PositionTrack> samples, std::span<const double> weights, const PositionTrack& truth,
                  HorizonPrefix prefix) {
  require(!samples.empty(), ErrorCode::kShape, "metrics need at least one sample");
  require(weights.empty() || weights.size() == samples.size(), ErrorCode::kShape, "weights and samples differ in count");
  require(prefix.last_step >= 1, ErrorCode::kShape, "metric prefix is empty");
  const auto needed = static_cast<std::size_t>(prefix.last_step) + 1;
  require(truth.size() >= needed, ErrorCode::kShape, "truth is shorter than the metric prefix");
  for (const auto& s : samples) {
    require(s.size() >= needed, ErrorCode::kShape, "sample is shorter than the metric prefix");
  }
}

double dist(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::vector<double> uniform_if_empty(std::span<const double> weights, std::size_t n) {
  if (!weights.empty()) return {weights.begin(), weights.end()};
  return std::vector<double>(n, 1.0);
}

std::vector<PositionTrack> embed_all(const SampleSet& samples) {
  std::vector<PositionTrack> out;
  out.reserve(samples.size());
  for (const auto& s : samples.samples) out.push_back(embed_human(s));
  return out;
}

}  // namespace

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::kAde: return "ADE";
    case MetricKind::kFde: return "FDE";
    case MetricKind::kKdeNll: return "KDE_NLL";
    case MetricKind::kMinAde: return "minADE";
    case MetricKind::kMinFde: return "minFDE";
  }
  return "unknown";
}

std::optional<MetricKind> metric_from_string(std::string_view name) {
  for (auto k : {MetricKind::kAde, MetricKind::kFde, MetricKind::kKdeNll, MetricKind::kMinAde, MetricKind::kMinFde}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

bool is_attribution_metric(MetricKind kind) {
  return kind == MetricKind::kAde || kind == MetricKind::kFde || kind == MetricKind::kKdeNll;
}

PositionTrack embed_human(const Trajectory& trajectory) {
  PositionTrack out;
  out.reserve(trajectory.states.size());
  for (const auto& st : trajectory.states) out.push_back(human_position(st.s));
  return out;
}

double ade(std::span<const PositionTrack> samples, std::span<const double> weights, const PositionTrack& truth,
           HorizonPrefix prefix) {
  check_inputs(samples, weights, truth, prefix);
  std::vector<double> per_sample(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    double acc = 0.0;
    for (int t = 1; t <= prefix.last_step; ++t) acc += dist(samples[k][t], truth[t]);
    per_sample[k] = acc / prefix.last_step;
  }
  return weighted_mean(per_sample, uniform_if_empty(weights, samples.size()));
}

double fde(std::span<const PositionTrack> samples, std::span<const double> weights, const PositionTrack& truth,
           HorizonPrefix prefix) {
  check_inputs(samples, weights, truth, prefix);
  std::vector<double> per_sample(samples.size());
  const int t = prefix.last_step;
  for (std::size_t k = 0; k < samples.size(); ++k) per_sample[k] = dist(samples[k][t], truth[t]);
  return weighted_mean(per_sample, uniform_if_empty(weights, samples.size()));
}

double scott_bandwidth(std::span<const double> values, std::span<const double> weights, double floor) {
  if (values.size() < 2) return floor;
  const double sd = std::sqrt(weighted_variance(values, weights));
  const double n = effective_sample_size(weights);
  return std::max(floor, sd * std::pow(n, -1.0 / 6.0));
}

double kde_nll(std::span<const PositionTrack> samples, std::span<const double> weights, const PositionTrack& truth,
               HorizonPrefix prefix, const KdeOptions& options) {
  check_inputs(samples, weights, truth, prefix);
  const auto w = uniform_if_empty(weights, samples.size());
  double total_w = 0.0;
  for (double x : w) total_w += x;
  const double log_norm_const = -std::log(2.0 * std::numbers::pi);

  std::vector<double> xs(samples.size());
  std::vector<double> ys(samples.size());
  std::vector<double> terms(samples.size());
  double acc = 0.0;
  for (int t = 1; t <= prefix.last_step; ++t) {
    for (std::size_t k = 0; k < samples.size(); ++k) {
      xs[k] = samples[k][t].x;
      ys[k] = samples[k][t].y;
    }
    const double hx = scott_bandwidth(xs, w, options.bandwidth_floor);
    const double hy = scott_bandwidth(ys, w, options.bandwidth_floor);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const double zx = (truth[t].x - xs[k]) / hx;
      const double zy = (truth[t].y - ys[k]) / hy;
      terms[k] = w[k] > 0.0 ? std::log(w[k] / total_w) - 0.5 * (zx * zx + zy * zy)
                            : -std::numeric_limits<double>::infinity();
      best = std::max(best, terms[k]);
    }
    double sum = 0.0;
    for (double term : terms) sum += std::exp(term - best);
    double log_density = best + std::log(sum) + log_norm_const - std::log(hx) - std::log(hy);
    if (!(log_density >= options.log_density_floor)) log_density = options.log_density_floor;
    acc += log_density;
  }
  return -acc / prefix.last_step;
}

double min_ade(std::span<const PositionTrack> samples, const PositionTrack& truth, HorizonPrefix prefix) {
  check_inputs(samples, {}, truth, prefix);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    double acc = 0.0;
    for (int t = 1; t <= prefix.last_step; ++t) acc += dist(s[t], truth[t]);
    best = std::min(best, acc / prefix.last_step);
  }
  return best;
}

double min_fde(std::span<const PositionTrack> samples, const PositionTrack& truth, HorizonPrefix prefix) {
  check_inputs(samples, {}, truth, prefix);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) best = std::min(best, dist(s[prefix.last_step], truth[prefix.last_step]));
  return best;
}

double ade(const SampleSet& samples, const Trajectory& truth, HorizonPrefix prefix) {
  return ade(embed_all(samples), samples.weights, embed_human(truth), prefix);
}

double fde(const SampleSet& samples, const Trajectory& truth, HorizonPrefix prefix) {
  return fde(embed_all(samples), samples.weights, embed_human(truth), prefix);
}

double kde_nll(const SampleSet& samples, const Trajectory& truth, HorizonPrefix prefix, const KdeOptions& options) {
  return kde_nll(embed_all(samples), samples.weights, embed_human(truth), prefix, options);
}

double min_variant(MetricKind kind, const SampleSet& samples, const Trajectory& truth, HorizonPrefix prefix) {
  require(kind == MetricKind::kMinAde || kind == MetricKind::kMinFde, ErrorCode::kInvalidArgument,
          "min_variant needs minADE or minFDE, got " + std::string(to_string(kind)));
  require(samples.uniform(), ErrorCode::kInvalidArgument, "min over a weighted sample set is undefined");
  const auto tracks = embed_all(samples);
  const auto truth_track = embed_human(truth);
  return kind == MetricKind::kMinAde ? min_ade(tracks, truth_track, prefix) : min_fde(tracks, truth_track, prefix);
}

double evaluate(MetricKind kind, const SampleSet& samples, const Trajectory& truth, HorizonPrefix prefix,
                const KdeOptions& options) {
  switch (kind) {
    case MetricKind::kAde: return ade(samples, truth, prefix);
    case MetricKind::kFde: return fde(samples, truth, prefix);
    case MetricKind::kKdeNll: return kde_nll(samples, truth, prefix, options);
    case MetricKind::kMinAde:
    case MetricKind::kMinFde: return min_variant(kind, samples, truth, prefix);
  }
  fail(ErrorCode::kInvalidArgument, "unknown metric");
}

}  // namespace ibp
