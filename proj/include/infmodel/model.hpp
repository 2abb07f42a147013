#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace infmodel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Statuses and sites are 0-based inside the library. Files and the CLI use
// 1-based numbering and convert at the boundary.
using JointState = std::vector<int>;

/// Raised when an input violates a structural invariant (bad model, bad state,
/// out-of-range index). The CLI maps it to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation cannot proceed on valid input (caps exceeded,
/// zero-probability conditioning, estimator failure). CLI exit code 1.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kStochasticTolerance = 1e-9;

struct Violation {
  std::string message;
  int row = -1;          // offending row, -1 when not row-specific
  double magnitude = 0;  // deviation size (row-sum error or negative value)
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

/// Network of n sites. Entry D(i, j) is the weight site j carries in the next
/// status of site i; rows of D sum to one. The local matrix for the ordered
/// pair (from j, to i) is m_j x m_i and is selected by the current status of j.
///
/// Instances are immutable; the validation report is computed once at
/// construction and consulted by every operation that needs a valid model.
class InfluenceModel {
 public:
  using PairKey = std::pair<int, int>;  // (from, to)

  /// Every pair shares one m x m matrix; requires equal status counts.
  static InfluenceModel homogeneous(Matrix network, Matrix local, std::vector<int> m);
  /// One matrix per ordered pair. Pairs with zero network weight may be absent.
  static InfluenceModel heterogeneous(Matrix network, std::map<PairKey, Matrix> locals,
                                      std::vector<int> m);

  int sites() const { return static_cast<int>(m_.size()); }
  const std::vector<int>& status_counts() const { return m_; }
  const Matrix& network() const { return D_; }
  bool is_homogeneous() const { return shared_.has_value(); }
  const std::optional<Matrix>& shared_local() const { return shared_; }
  const std::map<PairKey, Matrix>& pair_locals() const { return pairs_; }

  /// Local matrix used for (from -> to), or nullptr when none is stored.
  const Matrix* local(int from, int to) const;

  const ValidationReport& validation() const { return report_; }
  bool valid() const { return report_.ok(); }
  /// Throws ValidationError listing every violation.
  void require_valid() const;

  /// Size of the joint state space, saturating at SIZE_MAX.
  std::size_t joint_size() const;

 private:
  InfluenceModel(Matrix network, std::optional<Matrix> shared, std::map<PairKey, Matrix> pairs,
                 std::vector<int> m);

  std::vector<int> m_;
  Matrix D_;
  std::optional<Matrix> shared_;
  std::map<PairKey, Matrix> pairs_;
  ValidationReport report_;
};

ValidationReport validate_model(const InfluenceModel& model);

/// Checks that a matrix is entrywise nonnegative with unit row sums.
void check_row_stochastic(const Matrix& M, const std::string& name, double tol,
                          std::vector<Violation>& out);

/// Distribution of the next status of `site`: the D-weighted mix of the rows
/// of the incoming local matrices selected by each neighbour's status.
Vector next_status_distribution(const InfluenceModel& model, const JointState& state, int site);

/// Lexicographic codec over the joint state space, site 0 most significant.
class StateCodec {
 public:
  StateCodec() = default;
  explicit StateCodec(std::vector<int> m);

  std::size_t size() const { return size_; }
  int sites() const { return static_cast<int>(m_.size()); }
  const std::vector<int>& status_counts() const { return m_; }

  std::size_t index(std::span<const int> state) const;
  JointState state(std::size_t index) const;
  /// Status of one site at a joint index, without materialising the state.
  int status(std::size_t index, int site) const {
    return static_cast<int>((index / stride_[site]) % static_cast<std::size_t>(m_[site]));
  }

 private:
  std::vector<int> m_;
  std::vector<std::size_t> stride_;
  std::size_t size_ = 0;
};

std::size_t joint_index(const JointState& state, const std::vector<int>& m);
JointState joint_state(std::size_t index, const std::vector<int>& m);

/// Throws ValidationError when the state does not fit the status counts.
void require_state(const JointState& state, const std::vector<int>& m);

}  // namespace infmodel
