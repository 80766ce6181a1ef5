#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace ibp {

// State of one car on its approach path. `s` is the signed displacement to
// the collision point (positive before it), `v` the speed.
struct AgentState {
  double s = 0.0;
  double v = 0.0;

  bool operator==(const AgentState&) const = default;
};

bool is_valid(const AgentState& state);

struct IdmParams {
  double v0 = 10.0;     // desired speed [m/s]
  double T = 2.0;       // desired time headway [s]
  double s0 = 4.0;      // minimum gap [m]
  double delta = 4.0;   // acceleration exponent
  double a = 1.0;       // max acceleration [m/s^2]
  double b = 1.5;       // comfortable deceleration [m/s^2]
  double dt = 0.2;      // timestep [s]
  double sigma = 4.0;   // acceleration noise std [m/s^2]
  double far_target = -1.0e4;  // target used when a car does not have to yield [m]

  bool operator==(const IdmParams&) const = default;

  // Throws Error(kInvalidArgument) naming the offending field.
  void validate() const;
};

struct Scenario {
  AgentState human0{15.0, 8.0};
  AgentState robot0{15.0, 5.0};
  IdmParams params{};
  int horizon = 10;
  double geometry = std::numbers::pi / 2.0;  // angle between approach paths [rad]
  double collision_threshold = 2.0;          // [m]

  bool operator==(const Scenario&) const = default;

  void validate() const;
};

// States for t = 0 ... horizon; index 0 is the initial state.
struct Trajectory {
  std::vector<AgentState> states;

  int horizon() const { return static_cast<int>(states.size()) - 1; }
  const AgentState& operator[](std::size_t t) const { return states[t]; }
  AgentState& operator[](std::size_t t) { return states[t]; }

  bool operator==(const Trajectory&) const = default;
};

// Returns the index of the first invalid state, if any.
std::optional<std::size_t> first_invalid_state(const Trajectory& trajectory);

// K sampled human trajectories. Empty `weights` means uniform.
struct SampleSet {
  std::vector<Trajectory> samples;
  std::vector<double> weights;

  std::size_t size() const { return samples.size(); }
  bool weighted() const { return !weights.empty(); }
  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
  // True when weights are absent or all equal.
  bool uniform() const;

  bool operator==(const SampleSet&) const = default;

  void validate() const;
};

enum class SeedRole : std::uint8_t {
  kHumanNoise = 0,
  kRobotNoise = 1,
  kMarginalSample = 2,
  kResample = 3,
  kScenarioDraw = 4,
};

std::string_view to_string(SeedRole role);
std::optional<SeedRole> seed_role_from_string(std::string_view name);

// Names a random stream. Streams are a pure function of the key, so work
// can be split across threads in any order.
struct SeedKey {
  std::uint64_t root = 0;
  std::uint64_t scenario_id = 0;
  std::uint64_t trial = 0;
  SeedRole role = SeedRole::kHumanNoise;

  SeedKey with_role(SeedRole r) const {
    SeedKey k = *this;
    k.role = r;
    return k;
  }
  // Key for the i-th sub-draw under this key. Mixes the current role in,
  // so children of keys that differ only in role are distinct.
  SeedKey child(std::uint64_t index) const;

  bool operator==(const SeedKey&) const = default;
};

// 64-bit finalizer from SplitMix64.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_key(const SeedKey& key);

}  // namespace ibp
