#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ibp/idm.hpp"

namespace ibp {

enum class MetricKind { kAde, kFde, kKdeNll, kMinAde, kMinFde };

std::string_view to_string(MetricKind kind);
std::optional<MetricKind> metric_from_string(std::string_view name);

// Mean forms only; the min variants are biased for attribution.
bool is_attribution_metric(MetricKind kind);

// Metrics look at steps 1 ... last_step only.
struct HorizonPrefix {
  int last_step = 1;
};

// Positions of one track at t = 0 ... T in the planar embedding.
using PositionTrack = std::vector<Vec2>;

PositionTrack embed_human(const Trajectory& trajectory);

struct KdeOptions {
  double bandwidth_floor = 1e-3;  // per axis [m]
  double log_density_floor = -20.0;
};

// Core implementations on planar tracks. `weights` empty means uniform.
double ade(std::span<const PositionTrack> samples, std::span<const double> weights, const PositionTrack& truth,
           HorizonPrefix prefix);
double fde(std::span<const PositionTrack> samples, std::span<const double> weights, const PositionTrack& truth,
           HorizonPrefix prefix);
double kde_nll(std::span<const PositionTrack> samples, std::span<const double> weights, const PositionTrack& truth,
               HorizonPrefix prefix, const KdeOptions& options = {});
double min_ade(std::span<const PositionTrack> samples, const PositionTrack& truth, HorizonPrefix prefix);
double min_fde(std::span<const PositionTrack> samples, const PositionTrack& truth, HorizonPrefix prefix);

// Scott's rule bandwidth for one axis: sd * n^(-1/6), n the effective
// sample size, floored. Returns the floor for fewer than two samples.
double scott_bandwidth(std::span<const double> values, std::span<const double> weights, double floor);

// SampleSet overloads for human predictions.
double ade(const SampleSet& samples, const Trajectory& truth, HorizonPrefix prefix);
double fde(const SampleSet& samples, const Trajectory& truth, HorizonPrefix prefix);
double kde_nll(const SampleSet& samples, const Trajectory& truth, HorizonPrefix prefix, const KdeOptions& options = {});
// kind must be kMinAde or kMinFde; weighted (non-uniform) sets are rejected.
double min_variant(MetricKind kind, const SampleSet& samples, const Trajectory& truth, HorizonPrefix prefix);

double evaluate(MetricKind kind, const SampleSet& samples, const Trajectory& truth, HorizonPrefix prefix,
                const KdeOptions& options = {});

}  // namespace ibp
