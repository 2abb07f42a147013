#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "infmodel/model.hpp"

namespace infmodel {

inline constexpr std::size_t kDefaultStateCap = std::size_t{1} << 20;
inline constexpr int kDefaultHorizonCap = 12;
/// Entries at or below this count as absent in the support digraph.
inline constexpr double kSupportThreshold = 1e-12;

/// Transition matrix over the joint state space together with its codec.
struct MasterChain {
  Matrix G;
  std::vector<int> m;

  std::size_t size() const { return static_cast<std::size_t>(G.rows()); }
  StateCodec codec() const { return StateCodec(m); }
};

/// Throws ValidationError unless G is square, matches m, and is row-stochastic
/// within `tol`.
void require_chain(const MasterChain& chain, double tol = 1e-12);

/// G(s, s') = prod_i P(site i moves to s'_i | s); sites update independently
/// given the current joint state.
MasterChain build_master_chain(const InfluenceModel& model,
                               std::size_t state_cap = kDefaultStateCap);

struct ClassDecomposition {
  std::vector<std::vector<std::size_t>> classes;  // sorted by smallest member
  std::vector<bool> recurrent;                    // closed <=> recurrent (finite chain)
  std::vector<std::size_t> absorbing_states;

  std::size_t recurrent_count() const;
  /// Class index containing a state.
  std::size_t class_of(std::size_t state) const;
};

/// Strongly connected components of the support digraph of a square matrix.
ClassDecomposition communicating_classes(const Matrix& transition);
inline ClassDecomposition communicating_classes(const MasterChain& chain) {
  return communicating_classes(chain.G);
}

/// True iff one closed class holds every state (irreducible chain).
bool single_recurrent_class(const MasterChain& chain);

struct StationaryDistribution {
  Vector pi;
  std::size_t class_id = 0;
};

/// Stationary law supported on one recurrent class. With several recurrent
/// classes the class must be named; otherwise a ComputationError reports the
/// ambiguity.
StationaryDistribution stationary_distribution(const MasterChain& chain,
                                               std::optional<std::size_t> class_id = {});

/// Observed sites (0-based, strictly increasing) and the symbol each joint
/// state emits: the lexicographic index of its restriction to those sites.
class ObservedProjection {
 public:
  ObservedProjection(const std::vector<int>& m, std::vector<int> observed);

  const std::vector<int>& observed() const { return observed_; }
  const std::vector<int>& observed_counts() const { return sub_m_; }
  std::size_t symbols() const { return states_of_.size(); }
  std::size_t symbol_of(std::size_t state) const { return symbol_[state]; }
  const std::vector<std::size_t>& states_of(std::size_t symbol) const {
    return states_of_[symbol];
  }
  std::size_t encode(std::span<const int> tuple) const;
  std::vector<int> decode(std::size_t symbol) const;
  bool all_observed() const { return observed_.size() == full_m_.size(); }

 private:
  std::vector<int> full_m_;
  std::vector<int> observed_;
  std::vector<int> sub_m_;
  std::vector<std::size_t> symbol_;
  std::vector<std::vector<std::size_t>> states_of_;
};

/// Sequence of status tuples restricted to `observed` (0-based sites).
struct ObservationSequence {
  std::vector<int> observed;
  std::vector<std::vector<int>> values;

  std::size_t length() const { return values.size(); }
};

/// Log-probability of an observed path, marginalising the hidden sites by a
/// normalised forward recursion over the full joint space. Returns -inf for
/// an impossible path.
double observed_path_log_probability(const MasterChain& chain, const Vector& init,
                                     const ObservationSequence& path);
double observed_path_probability(const MasterChain& chain, const Vector& init,
                                 const ObservationSequence& path);

/// P(next | history) under `init`; ComputationError when P(history) = 0.
double conditional_observed_probability(const MasterChain& chain, const Vector& init,
                                        const ObservationSequence& history,
                                        const std::vector<int>& next);

struct ConditionalRow {
  std::vector<std::size_t> history;  // observed symbols
  std::size_t next = 0;
  double given_last = 0;     // P(next | last observation, same time index)
  double given_history = 0;  // P(next | whole history)
};

struct MarkovianityGap {
  double gap = 0;
  std::vector<std::size_t> worst_history;
  std::size_t worst_next = 0;
  std::vector<ConditionalRow> table;  // every positive-probability (history, next)
};

struct GapOptions {
  int horizon = 2;
  int horizon_cap = kDefaultHorizonCap;
  std::size_t node_cap = std::size_t{1} << 22;
  bool keep_table = true;
};

/// Largest |P(next | last) - P(next | history)| over all positive-probability
/// histories of length 2..horizon, enumerated depth first.
MarkovianityGap markovianity_gap(const MasterChain& chain, const Vector& init,
                                 const std::vector<int>& observed, const GapOptions& opts);

/// One-step conditionals P(o[1] = b | o[0] = a) under `init`. This is not, in
/// general, the transition matrix of any Markov process for the observations.
Matrix lumped_one_step_chain(const MasterChain& chain, const Vector& init,
                             const std::vector<int>& observed);

/// Checks that `init` is a probability vector of the chain's size.
void require_distribution(const Vector& init, std::size_t size, double tol = 1e-9);

/// Sorted, de-duplicated, range-checked observed site set (0-based).
std::vector<int> normalize_observed(std::vector<int> observed, int sites);

}  // namespace infmodel
