#pragma once

// Reference computations written directly from the model equations, without
// calling the library's dynamics. Tests compare the library against these.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ibp/core.hpp"

namespace oracle {

inline double headway(double s, double v) {
  if (s <= 0.0) return 0.0;
  if (v <= 0.0) return std::numeric_limits<double>::infinity();
  return s / v;
}

// IDM mean velocity update for a car at (s, v) heading to target d.
inline double idm_mean(double s, double v, double d, const ibp::IdmParams& p) {
  const double desired = p.s0 + std::max(0.0, v * p.T + v * (v - p.v0) / (2.0 * std::sqrt(p.a * p.b)));
  double gap = s - d;
  if (d == 0.0 && gap < 0.1) gap = 0.1;
  const double ratio = desired / gap;
  return v + p.dt * p.a * (1.0 - std::pow(v / p.v0, p.delta) - ratio * ratio);
}

struct Targets {
  double human;
  double robot;
};

inline Targets targets(double sh, double vh, double sr, double vr, const ibp::IdmParams& p) {
  const bool human_first = headway(sh, vh) <= headway(sr, vr);
  return {(!human_first && sr > 0.0) ? 0.0 : p.far_target, (human_first && sh > 0.0) ? 0.0 : p.far_target};
}

struct JointState {
  double sh, vh, sr, vr;
};

// Deterministic joint rollout (all noise zero).
inline std::vector<JointState> joint_noiseless(JointState x, int horizon, const ibp::IdmParams& p) {
  std::vector<JointState> out{x};
  for (int t = 0; t < horizon; ++t) {
    const auto d = targets(x.sh, x.vh, x.sr, x.vr, p);
    const double vh = std::max(0.0, idm_mean(x.sh, x.vh, d.human, p));
    const double vr = std::max(0.0, idm_mean(x.sr, x.vr, d.robot, p));
    x = {x.sh - p.dt * x.vh, vh, x.sr - p.dt * x.vr, vr};
    out.push_back(x);
  }
  return out;
}

inline double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::acos(-1.0)));
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

struct Posterior {
  Moments s_final;  // s_h at the horizon
  Moments v_first;  // v_h at step 1
};

// Posterior moments of the human under robot evidence for horizons 1 and 2.
// The robot's observed velocities leave only the human's first noise term
// w0 free to affect s_h,T and v_h,1: s_h,1 is deterministic, v_h,1 is a
// function of w0, and s_h,2 = s_h,1 - dt v_h,1. The evidence likelihood of
// v_r,2 depends on w0 through the right-of-way at step 1. The integral over
// w0 ~ N(0, sigma) is done by the trapezoid rule on a dense grid.
inline Posterior lw_quadrature(const ibp::AgentState& h0, const std::vector<ibp::AgentState>& robot,
                               const ibp::IdmParams& p, int horizon, int grid = 400001) {
  const double sd_ev = p.dt * p.sigma;
  const auto d0 = targets(h0.s, h0.v, robot[0].s, robot[0].v, p);
  const double mean_h0 = idm_mean(h0.s, h0.v, d0.human, p);
  const double sh1 = h0.s - p.dt * h0.v;
  const double lo = -10.0 * p.sigma;
  const double hi = 10.0 * p.sigma;
  const double step = (hi - lo) / (grid - 1);
  double z = 0.0, m_s = 0.0, m_s2 = 0.0, m_v = 0.0, m_v2 = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double w0 = lo + i * step;
    const double vh1 = std::max(0.0, mean_h0 + p.dt * w0);
    double like = 1.0;
    if (horizon >= 2) {
      const auto d1 = targets(sh1, vh1, robot[1].s, robot[1].v, p);
      like = normal_pdf(robot[2].v, idm_mean(robot[1].s, robot[1].v, d1.robot, p), sd_ev);
    }
    const double s_final = horizon >= 2 ? sh1 - p.dt * vh1 : sh1;
    const double weight = (i == 0 || i == grid - 1 ? 0.5 : 1.0) * normal_pdf(w0, 0.0, p.sigma) * like;
    z += weight;
    m_s += weight * s_final;
    m_s2 += weight * s_final * s_final;
    m_v += weight * vh1;
    m_v2 += weight * vh1 * vh1;
  }
  Posterior out;
  out.s_final.mean = m_s / z;
  out.s_final.variance = std::max(0.0, m_s2 / z - out.s_final.mean * out.s_final.mean);
  out.v_first.mean = m_v / z;
  out.v_first.variance = std::max(0.0, m_v2 / z - out.v_first.mean * out.v_first.mean);
  return out;
}

struct WeightedEstimate {
  double mean = 0.0;
  double mean_se = 0.0;
  double variance = 0.0;
  double variance_se = 0.0;
};

// Self-normalized importance-sampling moments with delta-method standard
// errors: se(mean)^2 = sum w_i^2 (x_i - mean)^2 for normalized w.
inline WeightedEstimate weighted_estimate(const std::vector<double>& x, const std::vector<double>& w) {
  double total = 0.0;
  for (double wi : w) total += wi;
  WeightedEstimate e;
  for (std::size_t i = 0; i < x.size(); ++i) e.mean += w[i] / total * x[i];
  for (std::size_t i = 0; i < x.size(); ++i) e.variance += w[i] / total * (x[i] - e.mean) * (x[i] - e.mean);
  double m_se = 0.0, v_se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double wn = w[i] / total;
    const double d = x[i] - e.mean;
    m_se += wn * wn * d * d;
    v_se += wn * wn * (d * d - e.variance) * (d * d - e.variance);
  }
  e.mean_se = std::sqrt(m_se);
  e.variance_se = std::sqrt(v_se);
  return e;
}

// Shapley values by brute force over all m! orderings.
inline std::vector<double> shapley_by_permutation(const std::vector<double>& nu, int m) {
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::vector<double> phi(m, 0.0);
  double count = 0.0;
  do {
    unsigned mask = 0;
    for (int j : order) {
      phi[j] += nu[mask | (1u << j)] - nu[mask];
      mask |= 1u << j;
    }
    count += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& x : phi) x /= count;
  return phi;
}

}  // namespace oracle
