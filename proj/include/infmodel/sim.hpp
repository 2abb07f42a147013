#pragma once

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "infmodel/master_chain.hpp"
#include "infmodel/model.hpp"

namespace infmodel {

/// Portable uniform source: std::mt19937_64 seeded with the raw seed, each
/// draw u = (x >> 11) * 2^-53 in [0, 1). Both steps are fully specified by the
/// standard, so trajectories are bit-identical across platforms.
class UniformRng {
 public:
  explicit UniformRng(std::uint64_t seed) : engine_(seed) {}
  double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Inverse-CDF pick: first index whose left-to-right cumulative sum exceeds
/// u. Zero-probability entries are never selected; if rounding leaves the
/// total below u, the last positive entry is returned.
int sample_index(std::span<const double> probs, double u);

/// Joint-state path s[0..T], stored as joint indices.
struct Trajectory {
  std::vector<int> m;
  std::vector<std::size_t> states;
  std::uint64_t fingerprint = 0;
  std::uint64_t seed = 0;

  std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
  JointState state(std::size_t k) const { return StateCodec(m).state(states.at(k)); }
};

/// Fixed start state, or a distribution over joint indices drawn with one
/// dedicated uniform before the first step.
using InitialCondition = std::variant<JointState, Vector>;

/// Stable 64-bit FNV-1a hash of the model's dimensions and parameters.
std::uint64_t model_fingerprint(const InfluenceModel& model);

/// Each step draws one uniform per site in ascending site order and picks the
/// site's next status by inverse CDF against next_status_distribution.
Trajectory sample_trajectory(const InfluenceModel& model, std::size_t T,
                             const InitialCondition& init, std::uint64_t seed);

ObservationSequence project_observations(const Trajectory& traj, std::vector<int> observed);

/// N x N transition counts; entries sum to T.
Matrix empirical_transition_counts(const Trajectory& traj);

}  // namespace infmodel
