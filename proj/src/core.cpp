#include "ibp/core.hpp"

#include <cmath>
#include <string>

#include "ibp/error.hpp"

namespace ibp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDegenerateWeights: return "degenerate-weights";
    case ErrorCode::kInvalidBins: return "invalid-bins";
    case ErrorCode::kNumericBlowup: return "numeric-blowup";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kZeroWeightEvidence: return "zero-weight-evidence";
    case ErrorCode::kIncompleteLattice: return "incomplete-lattice";
    case ErrorCode::kPredictorFailure: return "predictor-failure";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kMalformedMessage: return "malformed-message";
    case ErrorCode::kVersionMismatch: return "version-mismatch";
    case ErrorCode::kInvariantViolation: return "invariant-violation";
    case ErrorCode::kDeterminismViolation: return "determinism-violation";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

bool is_valid(const AgentState& state) {
  return std::isfinite(state.s) && std::isfinite(state.v) && state.v >= 0.0;
}

void IdmParams::validate() const {
  auto positive = [](double x, const char* name) {
    require(std::isfinite(x) && x > 0.0, ErrorCode::kInvalidArgument,
            std::string("IdmParams.") + name + " must be > 0");
  };
  positive(v0, "v0");
  positive(T, "T");
  positive(s0, "s0");
  positive(a, "a");
  positive(b, "b");
  positive(dt, "dt");
  require(std::isfinite(sigma) && sigma >= 0.0, ErrorCode::kInvalidArgument, "IdmParams.sigma must be >= 0");
  require(std::isfinite(delta) && delta >= 1.0, ErrorCode::kInvalidArgument, "IdmParams.delta must be >= 1");
  require(std::isfinite(far_target) && far_target < -100.0 * s0, ErrorCode::kInvalidArgument,
          "IdmParams.far_target must be < -100*s0");
}

void Scenario::validate() const {
  params.validate();
  require(is_valid(human0), ErrorCode::kInvalidArgument, "Scenario.human0 must be finite with v >= 0");
  require(is_valid(robot0), ErrorCode::kInvalidArgument, "Scenario.robot0 must be finite with v >= 0");
  require(horizon >= 1, ErrorCode::kInvalidArgument, "Scenario.horizon must be >= 1");
  require(geometry > 0.0 && geometry <= std::numbers::pi, ErrorCode::kInvalidArgument,
          "Scenario.geometry must lie in (0, pi]");
  require(std::isfinite(collision_threshold) && collision_threshold > 0.0, ErrorCode::kInvalidArgument,
          "Scenario.collision_threshold must be > 0");
}

std::optional<std::size_t> first_invalid_state(const Trajectory& trajectory) {
  for (std::size_t t = 0; t < trajectory.states.size(); ++t) {
    if (!is_valid(trajectory.states[t])) return t;
  }
  return std::nullopt;
}

bool SampleSet::uniform() const {
  for (double w : weights) {
    if (w != weights.front()) return false;
  }
  return true;
}

void SampleSet::validate() const {
  require(!samples.empty(), ErrorCode::kShape, "SampleSet must hold at least one sample");
  if (weights.empty()) return;
  require(weights.size() == samples.size(), ErrorCode::kShape, "SampleSet weight count differs from sample count");
  double total = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, ErrorCode::kDegenerateWeights, "SampleSet weights must be finite and >= 0");
    total += w;
  }
  require(total > 0.0, ErrorCode::kDegenerateWeights, "SampleSet weights sum to zero");
}

std::string_view to_string(SeedRole role) {
  switch (role) {
    case SeedRole::kHumanNoise: return "human-noise";
    case SeedRole::kRobotNoise: return "robot-noise";
    case SeedRole::kMarginalSample: return "marginal-sample";
    case SeedRole::kResample: return "resample";
    case SeedRole::kScenarioDraw: return "scenario-draw";
  }
  return "unknown";
}

std::optional<SeedRole> seed_role_from_string(std::string_view name) {
  for (auto role : {SeedRole::kHumanNoise, SeedRole::kRobotNoise, SeedRole::kMarginalSample, SeedRole::kResample,
                    SeedRole::kScenarioDraw}) {
    if (to_string(role) == name) return role;
  }
  return std::nullopt;
}

SeedKey SeedKey::child(std::uint64_t index) const {
  SeedKey k = *this;
  k.trial = mix64(mix64(trial ^ (static_cast<std::uint64_t>(role) << 56)) + index);
  return k;
}

std::uint64_t hash_key(const SeedKey& key) {
  std::uint64_t h = mix64(key.root);
  h = mix64(h ^ key.scenario_id);
  h = mix64(h ^ key.trial);
  h = mix64(h ^ static_cast<std::uint64_t>(key.role));
  return h;
}

}  // namespace ibp
