#include "ibp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ibp/error.hpp"

namespace ibp {
namespace {

double checked_sum(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, ErrorCode::kDegenerateWeights, "weights must be finite and >= 0");
    total += w;
  }
  require(total > 0.0, ErrorCode::kDegenerateWeights, "weight sum is zero");
  return total;
}

}  // namespace

double weighted_mean(std::span<const double> values, std::span<const double> weights) {
  require(values.size() == weights.size(), ErrorCode::kShape, "values and weights differ in length");
  const double total = checked_sum(weights);
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += weights[i] * values[i];
  return acc / total;
}

double weighted_variance(std::span<const double> values, std::span<const double> weights) {
  const double mean = weighted_mean(values, weights);
  double total = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - mean;
    acc += weights[i] * d * d;
    total += weights[i];
  }
  return acc / total;
}

double effective_sample_size(std::span<const double> weights) {
  const double total = checked_sum(weights);
  double squares = 0.0;
  for (double w : weights) {
    const double r = w / total;
    squares += r * r;
  }
  return 1.0 / squares;
}

double Histogram::in_range() const {
  double acc = 0.0;
  for (double m : masses) acc += m;
  return acc;
}

Histogram histogram(std::span<const double> values, std::span<const double> weights, std::span<const double> edges) {
  require(edges.size() >= 2, ErrorCode::kInvalidBins, "need at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    require(edges[i] > edges[i - 1], ErrorCode::kInvalidBins,
            "bin edges must be strictly increasing (index " + std::to_string(i) + ")");
  }
  require(weights.empty() || weights.size() == values.size(), ErrorCode::kShape, "values and weights differ in length");

  Histogram h;
  h.edges.assign(edges.begin(), edges.end());
  h.masses.assign(edges.size() - 1, 0.0);
  if (values.empty()) return h;

  const double total = weights.empty() ? static_cast<double>(values.size()) : checked_sum(weights);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = (weights.empty() ? 1.0 : weights[i]) / total;
    const double x = values[i];
    if (x < edges.front()) {
      h.below += w;
    } else if (x > edges.back()) {
      h.above += w;
    } else {
      auto it = std::upper_bound(edges.begin(), edges.end(), x);
      std::size_t bin = static_cast<std::size_t>(it - edges.begin()) - 1;
      bin = std::min(bin, h.masses.size() - 1);
      h.masses[bin] += w;
    }
  }
  return h;
}

std::vector<double> linspace_edges(double lo, double hi, std::size_t bins) {
  require(bins >= 1 && hi > lo, ErrorCode::kInvalidBins, "linspace_edges needs hi > lo and bins >= 1");
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  return edges;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t count,
                                             RandomStream& stream) {
  const double total = checked_sum(weights);
  std::vector<std::size_t> ancestors;
  ancestors.reserve(count);
  if (count == 0) return ancestors;
  const double step = 1.0 / static_cast<double>(count);
  const double offset = stream.uniform() * step;
  std::size_t i = 0;
  double cumulative = weights[0] / total;
  for (std::size_t m = 0; m < count; ++m) {
    const double u = offset + static_cast<double>(m) * step;
    while (i + 1 < weights.size() && (u >= cumulative || weights[i] == 0.0)) {
      ++i;
      cumulative += weights[i] / total;
    }
    // Rounding in the running sum can push u past the last positive weight.
    std::size_t pick = i;
    while (weights[pick] == 0.0 && pick > 0) --pick;
    ancestors.push_back(pick);
  }
  return ancestors;
}

}  // namespace ibp
