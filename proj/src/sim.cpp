#include "infmodel/sim.hpp"

#include <bit>

namespace infmodel {

int sample_index(std::span<const double> probs, double u) {
  double cumulative = 0;
  int last_positive = -1;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0) continue;
    last_positive = static_cast<int>(k);
    cumulative += probs[k];
    if (cumulative > u) return static_cast<int>(k);
  }
  if (last_positive < 0) throw ValidationError("cannot sample from an all-zero distribution");
  return last_positive;
}

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t k = 0; k < n; ++k) {
      h ^= b[k];
      h *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) {
      const unsigned char c = static_cast<unsigned char>(v >> (8 * k));
      bytes(&c, 1);
    }
  }
  void real(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void matrix(const Matrix& M) {
    u64(static_cast<std::uint64_t>(M.rows()));
    u64(static_cast<std::uint64_t>(M.cols()));
    for (Eigen::Index r = 0; r < M.rows(); ++r)
      for (Eigen::Index c = 0; c < M.cols(); ++c) real(M(r, c));
  }
};

}  // namespace

std::uint64_t model_fingerprint(const InfluenceModel& model) {
  Fnv1a f;
  f.u64(static_cast<std::uint64_t>(model.sites()));
  for (int mi : model.status_counts()) f.u64(static_cast<std::uint64_t>(mi));
  f.matrix(model.network());
  if (model.shared_local()) {
    f.u64(1);
    f.matrix(*model.shared_local());
  } else {
    f.u64(2);
    for (const auto& [key, A] : model.pair_locals()) {
      f.u64(static_cast<std::uint64_t>(key.first));
      f.u64(static_cast<std::uint64_t>(key.second));
      f.matrix(A);
    }
  }
  return f.h;
}

Trajectory sample_trajectory(const InfluenceModel& model, std::size_t T,
                             const InitialCondition& init, std::uint64_t seed) {
  model.require_valid();
  const auto& m = model.status_counts();
  const int n = model.sites();
  const StateCodec codec(m);
  UniformRng rng(seed);

  JointState state;
  if (const auto* fixed = std::get_if<JointState>(&init)) {
    require_state(*fixed, m);
    state = *fixed;
  } else {
    const Vector& dist = std::get<Vector>(init);
    require_distribution(dist, codec.size());
    state = codec.state(static_cast<std::size_t>(
        sample_index(std::span<const double>(dist.data(), dist.size()), rng.next())));
  }

  Trajectory traj{m, {}, model_fingerprint(model), seed};
  traj.states.reserve(T + 1);
  traj.states.push_back(codec.index(state));

  const Matrix& D = model.network();
  std::vector<Vector> dist(n);
  JointState next(n);
  for (std::size_t k = 0; k < T; ++k) {
    for (int i = 0; i < n; ++i) {
      dist[i] = Vector::Zero(m[i]);
      for (int j = 0; j < n; ++j) {
        if (D(i, j) == 0) continue;
        dist[i] += D(i, j) * model.local(j, i)->row(state[j]).transpose();
      }
      next[i] = sample_index(std::span<const double>(dist[i].data(), m[i]), rng.next());
    }
    state.swap(next);
    traj.states.push_back(codec.index(state));
  }
  return traj;
}

ObservationSequence project_observations(const Trajectory& traj, std::vector<int> observed) {
  observed = normalize_observed(std::move(observed), static_cast<int>(traj.m.size()));
  const StateCodec codec(traj.m);
  ObservationSequence out{observed, {}};
  out.values.reserve(traj.states.size());
  for (std::size_t s : traj.states) {
    std::vector<int> tuple(observed.size());
    for (std::size_t k = 0; k < observed.size(); ++k) tuple[k] = codec.status(s, observed[k]);
    out.values.push_back(std::move(tuple));
  }
  return out;
}

Matrix empirical_transition_counts(const Trajectory& traj) {
  if (traj.steps() < 1) throw ValidationError("transition counts need at least one transition");
  const StateCodec codec(traj.m);
  Matrix C = Matrix::Zero(codec.size(), codec.size());
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k)
    C(traj.states[k], traj.states[k + 1]) += 1.0;
  return C;
}

}  // namespace infmodel
