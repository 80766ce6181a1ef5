#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ibp/rng.hpp"

namespace ibp {

// All reductions run in index order so results do not depend on how the
// inputs were produced.

double weighted_mean(std::span<const double> values, std::span<const double> weights);

// Weighted population variance around the weighted mean.
double weighted_variance(std::span<const double> values, std::span<const double> weights);

// (sum w)^2 / sum w^2, in (0, K].
double effective_sample_size(std::span<const double> weights);

struct Histogram {
  std::vector<double> edges;
  std::vector<double> masses;  // one per bin, normalized by the total weight
  double below = 0.0;          // mass left of edges.front()
  double above = 0.0;          // mass right of edges.back()

  double in_range() const;
};

// Bins are half-open [e_i, e_{i+1}) except the last, which is closed.
// Empty `weights` means uniform. Empty `values` gives all-zero masses.
Histogram histogram(std::span<const double> values, std::span<const double> weights, std::span<const double> edges);

std::vector<double> linspace_edges(double lo, double hi, std::size_t bins);

// Systematic (low-variance) resampling: `count` ancestor indices drawn
// with one uniform offset.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t count,
                                             RandomStream& stream);

}  // namespace ibp
