#include "infmodel/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace infmodel {

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < violations.size(); ++k) {
    if (k) os << "; ";
    os << violations[k].message;
  }
  return os.str();
}

void check_row_stochastic(const Matrix& M, const std::string& name, double tol,
                          std::vector<Violation>& out) {
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      const double v = M(r, c);
      if (!std::isfinite(v)) {
        out.push_back({name + " has a non-finite entry at (" + std::to_string(r + 1) + ", " +
                           std::to_string(c + 1) + ")",
                       static_cast<int>(r), std::numeric_limits<double>::infinity()});
      } else if (v < 0) {
        std::ostringstream os;
        os << name << " has a negative entry " << v << " at (" << r + 1 << ", " << c + 1 << ")";
        out.push_back({os.str(), static_cast<int>(r), -v});
      }
    }
    const double sum = M.row(r).sum();
    if (std::isfinite(sum) && std::abs(sum - 1.0) > tol) {
      std::ostringstream os;
      os << "row " << r + 1 << " of " << name << " sums to " << sum;
      out.push_back({os.str(), static_cast<int>(r), std::abs(sum - 1.0)});
    }
  }
}

namespace {

ValidationReport compute_report(const std::vector<int>& m, const Matrix& D,
                                const std::optional<Matrix>& shared,
                                const std::map<InfluenceModel::PairKey, Matrix>& pairs) {
  ValidationReport rep;
  auto& v = rep.violations;
  const int n = static_cast<int>(m.size());
  if (n < 1) {
    v.push_back({"model has no sites"});
    return rep;
  }
  for (int i = 0; i < n; ++i) {
    if (m[i] < 1 || (n > 1 && m[i] < 2)) {
      v.push_back({"site " + std::to_string(i + 1) + " has " + std::to_string(m[i]) +
                   " statuses (at least 2 required)"});
    }
  }
  if (D.rows() != n || D.cols() != n) {
    v.push_back({"D is " + std::to_string(D.rows()) + "x" + std::to_string(D.cols()) +
                 ", expected " + std::to_string(n) + "x" + std::to_string(n)});
    return rep;
  }
  check_row_stochastic(D, "D", kStochasticTolerance, v);
  if (!v.empty()) return rep;

  if (shared) {
    for (int i = 1; i < n; ++i) {
      if (m[i] != m[0]) {
        v.push_back({"shared local matrix requires equal status counts"});
        return rep;
      }
    }
    if (shared->rows() != m[0] || shared->cols() != m[0]) {
      v.push_back({"shared local matrix has wrong shape"});
      return rep;
    }
    check_row_stochastic(*shared, "A", kStochasticTolerance, v);
    return rep;
  }

  for (const auto& [key, A] : pairs) {
    const auto [from, to] = key;
    const std::string name =
        "A(" + std::to_string(from + 1) + "," + std::to_string(to + 1) + ")";
    if (from < 0 || from >= n || to < 0 || to >= n) {
      v.push_back({name + " refers to a missing site"});
      continue;
    }
    if (A.rows() != m[from] || A.cols() != m[to]) {
      v.push_back({name + " has shape " + std::to_string(A.rows()) + "x" +
                   std::to_string(A.cols()) + ", expected " + std::to_string(m[from]) + "x" +
                   std::to_string(m[to])});
      continue;
    }
    check_row_stochastic(A, name, kStochasticTolerance, v);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (D(i, j) > 0 && !pairs.count({j, i})) {
        v.push_back({"A(" + std::to_string(j + 1) + "," + std::to_string(i + 1) +
                     ") is missing but D(" + std::to_string(i + 1) + "," +
                     std::to_string(j + 1) + ") > 0"});
      }
    }
  }
  return rep;
}

}  // namespace

InfluenceModel::InfluenceModel(Matrix network, std::optional<Matrix> shared,
                               std::map<PairKey, Matrix> pairs, std::vector<int> m)
    : m_(std::move(m)), D_(std::move(network)), shared_(std::move(shared)),
      pairs_(std::move(pairs)) {
  report_ = compute_report(m_, D_, shared_, pairs_);
}

InfluenceModel InfluenceModel::homogeneous(Matrix network, Matrix local, std::vector<int> m) {
  return InfluenceModel(std::move(network), std::move(local), {}, std::move(m));
}

InfluenceModel InfluenceModel::heterogeneous(Matrix network, std::map<PairKey, Matrix> locals,
                                             std::vector<int> m) {
  return InfluenceModel(std::move(network), std::nullopt, std::move(locals), std::move(m));
}

const Matrix* InfluenceModel::local(int from, int to) const {
  if (shared_) return &*shared_;
  auto it = pairs_.find({from, to});
  return it == pairs_.end() ? nullptr : &it->second;
}

void InfluenceModel::require_valid() const {
  if (!valid()) throw ValidationError("invalid influence model: " + report_.summary());
}

std::size_t InfluenceModel::joint_size() const {
  std::size_t total = 1;
  for (int mi : m_) {
    if (mi <= 0) return 0;
    if (total > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(mi))
      return std::numeric_limits<std::size_t>::max();
    total *= static_cast<std::size_t>(mi);
  }
  return total;
}

ValidationReport validate_model(const InfluenceModel& model) { return model.validation(); }

void require_state(const JointState& state, const std::vector<int>& m) {
  if (state.size() != m.size())
    throw ValidationError("joint state has " + std::to_string(state.size()) +
                          " entries, expected " + std::to_string(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (state[i] < 0 || state[i] >= m[i])
      throw ValidationError("status " + std::to_string(state[i] + 1) + " of site " +
                            std::to_string(i + 1) + " is out of range 1.." +
                            std::to_string(m[i]));
  }
}

Vector next_status_distribution(const InfluenceModel& model, const JointState& state, int site) {
  model.require_valid();
  const auto& m = model.status_counts();
  if (site < 0 || site >= model.sites())
    throw ValidationError("site index " + std::to_string(site + 1) + " out of range");
  require_state(state, m);

  const Matrix& D = model.network();
  Vector p = Vector::Zero(m[site]);
  for (int j = 0; j < model.sites(); ++j) {
    const double w = D(site, j);
    if (w == 0) continue;
    p += w * model.local(j, site)->row(state[j]).transpose();
  }
  return p;
}

StateCodec::StateCodec(std::vector<int> m) : m_(std::move(m)), stride_(m_.size()) {
  std::size_t s = 1;
  for (std::size_t i = m_.size(); i-- > 0;) {
    if (m_[i] < 1) throw ValidationError("status counts must be positive");
    stride_[i] = s;
    if (s > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(m_[i]))
      throw ValidationError("joint state space overflows");
    s *= static_cast<std::size_t>(m_[i]);
  }
  size_ = s;
}

std::size_t StateCodec::index(std::span<const int> state) const {
  if (state.size() != m_.size())
    throw ValidationError("joint state arity does not match status counts");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < m_.size(); ++i) {
    if (state[i] < 0 || state[i] >= m_[i])
      throw ValidationError("status " + std::to_string(state[i] + 1) + " of site " +
                            std::to_string(i + 1) + " is out of range");
    idx += static_cast<std::size_t>(state[i]) * stride_[i];
  }
  return idx;
}

JointState StateCodec::state(std::size_t index) const {
  if (index >= size_) throw ValidationError("joint index out of range");
  JointState s(m_.size());
  for (std::size_t i = 0; i < m_.size(); ++i) s[i] = status(index, static_cast<int>(i));
  return s;
}

std::size_t joint_index(const JointState& state, const std::vector<int>& m) {
  return StateCodec(m).index(state);
}

JointState joint_state(std::size_t index, const std::vector<int>& m) {
  return StateCodec(m).state(index);
}

}  // namespace infmodel
