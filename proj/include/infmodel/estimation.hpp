#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "infmodel/master_chain.hpp"
#include "infmodel/model.hpp"
#include "infmodel/sim.hpp"

namespace infmodel {

/// Shape of an influence model without its numbers: status counts, whether
/// one local matrix is shared by all pairs, and which D entries may be
/// nonzero.
struct ModelStructure {
  std::vector<int> m;
  bool shared_local = true;
  std::vector<std::vector<bool>> network_support;  // [to][from]

  int sites() const { return static_cast<int>(m.size()); }
  /// Dense support with the given sharing pattern.
  static ModelStructure dense(std::vector<int> m, bool shared_local);
  /// Skeleton of an existing model (support = nonzero D entries).
  static ModelStructure of(const InfluenceModel& model);
  void validate() const;
};

// ---------------------------------------------------------------------------
// Fully observed master chain: counting MLE.

struct FullObsEstimate {
  Matrix G_hat;   // unvisited rows are left at zero
  Matrix counts;
  std::vector<bool> visited;
  bool recurrence_ok = false;
  bool recurrence_empirical = true;  // false when judged on a supplied true chain
};

/// Row-normalised transition counts. Unvisited rows are reported through the
/// mask. Recurrence is judged on `truth` when given, else on the observed
/// support (every row visited and one closed class).
FullObsEstimate estimate_G_counting(const Trajectory& traj, const MasterChain* truth = nullptr);

// ---------------------------------------------------------------------------
// Influence parameter estimates (recovery from G and direct EM).

struct RestartSummary {
  std::size_t index = 0;
  double objective = 0;
  int iterations = 0;
  bool converged = false;
};

struct InfluenceParamEstimate {
  InfluenceModel model;
  double objective = 0;  // squared fit error (recover) or log-likelihood (EM)
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective per iteration of the selected restart
  std::vector<RestartSummary> restarts;
  std::size_t best_restart = 0;
  // Largest max-norm parameter distance between the selected restart and any
  // other restart whose objective is within `near_optimal_gap` of it.
  double dispersion = 0;
  std::size_t near_optimal = 1;
  bool unique_optimum = true;
};

struct RecoverConfig {
  int restarts = 16;
  std::uint64_t seed = 0;
  int max_iters = 20000;
  double tol = 1e-14;             // projected-gradient max norm
  double near_optimal_gap = 1e-9;
  double dispersion_tol = 1e-4;
};

/// Sum over visited rows of the squared difference between G(D, A) and G_hat.
double influence_fit_objective(const InfluenceModel& model, const Matrix& G_hat,
                               const std::vector<bool>& visited);

/// Multi-start spectral projected gradient over the product of simplices
/// formed by the rows of D and of the local matrices.
InfluenceParamEstimate recover_influence_params(const Matrix& G_hat,
                                                const std::vector<bool>& visited,
                                                const ModelStructure& structure,
                                                const RecoverConfig& config = {});

struct EmConfig {
  int restarts = 5;
  std::uint64_t seed = 0;
  int max_iters = 500;
  double tol = 1e-9;  // relative log-likelihood improvement
  double smoothing = 1e-8;
};

/// Transition log-likelihood of a trajectory (initial state excluded).
double full_obs_log_likelihood(const InfluenceModel& model, const Trajectory& traj);

/// EM over (D, A) with the influencing neighbour as latent variable. Runs on
/// the sufficient statistics C_i(s, b) = #{k : s[k] = s, s_i[k+1] = b}.
InfluenceParamEstimate direct_em_full_obs(const Trajectory& traj, const ModelStructure& structure,
                                          const EmConfig& config = {});

/// Single EM run from a given starting model, for diagnostics and tests.
InfluenceParamEstimate direct_em_full_obs_from(const Trajectory& traj,
                                               const InfluenceModel& start,
                                               const EmConfig& config);

// ---------------------------------------------------------------------------
// Partially observed model as a hidden Markov model.

/// Scaled forward algorithm restricted to the joint states consistent with
/// each observation. Returns -inf for an impossible sequence.
double forward_log_likelihood(const ObservationSequence& obs, const MasterChain& chain,
                              const Vector& init);

struct HmmRestart {
  std::size_t index = 0;
  double log_likelihood = 0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;
  std::vector<double> trace;
};

struct HMMEstimate {
  std::vector<int> m;
  std::vector<int> observed;
  Matrix G_hat;
  Vector init_hat;
  std::vector<double> trace;  // log-likelihood per iteration, best restart
  std::vector<HmmRestart> restarts;
  std::size_t best_restart = 0;
};

/// Baum-Welch over the hidden master chain with the projection onto the
/// observed sites as a fixed deterministic emission. Only G and the initial
/// law are re-estimated.
HMMEstimate baum_welch_poim(const ObservationSequence& obs, const std::vector<int>& m,
                            const EmConfig& config = {});

/// One Baum-Welch run from the given start.
HMMEstimate baum_welch_from(const ObservationSequence& obs, const std::vector<int>& m,
                            const Matrix& G0, const Vector& init0, const EmConfig& config);

struct PermutationMatchReport {
  // Estimated state matched to each true state: G_est(p[a], p[b]) ~ G_true(a, b).
  std::vector<std::size_t> permutation;
  double error = 0;
  Matrix residuals;
  std::size_t candidates = 0;
};

inline constexpr std::size_t kPermutationCap = 3628800;  // 10!

/// Exhaustive search over relabelings that permute states only within groups
/// sharing the same observed projection.
PermutationMatchReport permutation_match(const Matrix& G_est, const Matrix& G_true,
                                         const std::vector<int>& observed,
                                         const std::vector<int>& m,
                                         std::size_t cap = kPermutationCap);

/// All projection-preserving relabelings, identity first.
std::vector<std::vector<std::size_t>> hidden_relabelings(const std::vector<int>& m,
                                                         const std::vector<int>& observed,
                                                         std::size_t cap = kPermutationCap);

struct PoimFit {
  HMMEstimate hmm;
  std::vector<std::size_t> relabeling;  // applied to hmm.G_hat before the fit
  bool relabeling_searched = false;
  InfluenceParamEstimate params;
};

/// Two-stage identification: Baum-Welch for the hidden chain, then the
/// influence structure fitted to it under the best projection-preserving
/// relabeling (at most `max_relabelings` are tried).
PoimFit identify_poim(const ObservationSequence& obs, const ModelStructure& structure,
                      const EmConfig& em = {}, const RecoverConfig& recover = {},
                      std::size_t max_relabelings = 24);

}  // namespace infmodel
