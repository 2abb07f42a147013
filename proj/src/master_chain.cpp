#include "infmodel/master_chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace infmodel {

void require_chain(const MasterChain& chain, double tol) {
  const StateCodec codec(chain.m);
  if (chain.G.rows() != chain.G.cols())
    throw ValidationError("transition matrix is not square");
  if (static_cast<std::size_t>(chain.G.rows()) != codec.size())
    throw ValidationError("transition matrix size " + std::to_string(chain.G.rows()) +
                          " does not match the joint state space size " +
                          std::to_string(codec.size()));
  std::vector<Violation> v;
  check_row_stochastic(chain.G, "G", tol, v);
  if (!v.empty()) {
    ValidationReport rep{std::move(v)};
    throw ValidationError("invalid transition matrix: " + rep.summary());
  }
}

MasterChain build_master_chain(const InfluenceModel& model, std::size_t state_cap) {
  model.require_valid();
  const std::size_t N = model.joint_size();
  if (N > state_cap)
    throw ComputationError("joint state space has " + std::to_string(N) +
                           " states, above the cap of " + std::to_string(state_cap));

  const auto& m = model.status_counts();
  const int n = model.sites();
  const StateCodec codec(m);
  const Matrix& D = model.network();

  MasterChain chain{Matrix(N, N), m};
  std::vector<Vector> marginals(n);
  Vector row, next;
  for (std::size_t s = 0; s < N; ++s) {
    const JointState state = codec.state(s);
    for (int i = 0; i < n; ++i) {
      marginals[i] = Vector::Zero(m[i]);
      for (int j = 0; j < n; ++j) {
        if (D(i, j) == 0) continue;
        marginals[i] += D(i, j) * model.local(j, i)->row(state[j]).transpose();
      }
    }
    // Kronecker product in site order keeps site 0 most significant.
    row = Vector::Ones(1);
    for (int i = 0; i < n; ++i) {
      next.resize(row.size() * m[i]);
      for (Eigen::Index a = 0; a < row.size(); ++a)
        next.segment(a * m[i], m[i]) = row(a) * marginals[i];
      row.swap(next);
    }
    chain.G.row(static_cast<Eigen::Index>(s)) = row.transpose();
  }
  return chain;
}

std::size_t ClassDecomposition::recurrent_count() const {
  return static_cast<std::size_t>(std::count(recurrent.begin(), recurrent.end(), true));
}

std::size_t ClassDecomposition::class_of(std::size_t state) const {
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (std::binary_search(classes[c].begin(), classes[c].end(), state)) return c;
  }
  throw ValidationError("state " + std::to_string(state) + " is not in any class");
}

ClassDecomposition communicating_classes(const Matrix& transition) {
  if (transition.rows() != transition.cols())
    throw ValidationError("transition matrix is not square");
  const std::size_t N = static_cast<std::size_t>(transition.rows());

  std::vector<std::vector<std::size_t>> adj(N);
  for (std::size_t s = 0; s < N; ++s)
    for (std::size_t t = 0; t < N; ++t)
      if (transition(s, t) > kSupportThreshold) adj[s].push_back(t);

  // Iterative Tarjan.
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(N, kUnset), low(N, 0), comp(N, kUnset);
  std::vector<bool> on_stack(N, false);
  std::vector<std::size_t> stack;
  std::vector<std::pair<std::size_t, std::size_t>> call;  // (node, next edge)
  std::vector<std::vector<std::size_t>> classes;
  std::size_t counter = 0;

  for (std::size_t root = 0; root < N; ++root) {
    if (index[root] != kUnset) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      auto& [v, e] = call.back();
      if (e < adj[v].size()) {
        const std::size_t w = adj[v][e++];
        if (index[w] == kUnset) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      const std::size_t done = v;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
      if (low[done] == index[done]) {
        std::vector<std::size_t> members;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          members.push_back(w);
        } while (w != done);
        std::sort(members.begin(), members.end());
        classes.push_back(std::move(members));
      }
    }
  }

  std::sort(classes.begin(), classes.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  for (std::size_t c = 0; c < classes.size(); ++c)
    for (std::size_t s : classes[c]) comp[s] = c;

  ClassDecomposition out;
  out.recurrent.assign(classes.size(), true);
  for (std::size_t s = 0; s < N; ++s)
    for (std::size_t t : adj[s])
      if (comp[t] != comp[s]) out.recurrent[comp[s]] = false;
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (out.recurrent[c] && classes[c].size() == 1) out.absorbing_states.push_back(classes[c][0]);
  std::sort(out.absorbing_states.begin(), out.absorbing_states.end());
  out.classes = std::move(classes);
  return out;
}

bool single_recurrent_class(const MasterChain& chain) {
  require_chain(chain);
  const auto dec = communicating_classes(chain);
  return dec.classes.size() == 1 && dec.recurrent[0];
}

StationaryDistribution stationary_distribution(const MasterChain& chain,
                                               std::optional<std::size_t> class_id) {
  require_chain(chain);
  const auto dec = communicating_classes(chain);
  std::size_t cid;
  if (class_id) {
    if (*class_id >= dec.classes.size())
      throw ValidationError("class id " + std::to_string(*class_id) + " out of range");
    if (!dec.recurrent[*class_id])
      throw ValidationError("class " + std::to_string(*class_id) + " is transient");
    cid = *class_id;
  } else {
    if (dec.recurrent_count() != 1)
      throw ComputationError("ambiguous stationary distribution: " +
                             std::to_string(dec.recurrent_count()) +
                             " recurrent classes; select one");
    cid = static_cast<std::size_t>(
        std::find(dec.recurrent.begin(), dec.recurrent.end(), true) - dec.recurrent.begin());
  }

  // Solve (P^T - I) x = 0 on the closed class, last equation replaced by sum(x) = 1.
  const auto& members = dec.classes[cid];
  const Eigen::Index k = static_cast<Eigen::Index>(members.size());
  Matrix M(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c)
      M(r, c) = chain.G(members[c], members[r]) - (r == c ? 1.0 : 0.0);
  M.row(k - 1).setOnes();
  Vector rhs = Vector::Zero(k);
  rhs(k - 1) = 1.0;
  Vector x = M.fullPivLu().solve(rhs);
  x = x.cwiseMax(0.0);
  x /= x.sum();

  StationaryDistribution out{Vector::Zero(chain.G.rows()), cid};
  for (Eigen::Index r = 0; r < k; ++r) out.pi(members[r]) = x(r);
  return out;
}

ObservedProjection::ObservedProjection(const std::vector<int>& m, std::vector<int> observed)
    : full_m_(m), observed_(normalize_observed(std::move(observed), static_cast<int>(m.size()))) {
  for (int site : observed_) sub_m_.push_back(m[site]);
  const StateCodec full(m);
  const StateCodec sub(sub_m_);
  states_of_.resize(sub.size());
  symbol_.resize(full.size());
  std::vector<int> tuple(observed_.size());
  for (std::size_t s = 0; s < full.size(); ++s) {
    for (std::size_t k = 0; k < observed_.size(); ++k) tuple[k] = full.status(s, observed_[k]);
    symbol_[s] = sub.index(tuple);
    states_of_[symbol_[s]].push_back(s);
  }
}

std::size_t ObservedProjection::encode(std::span<const int> tuple) const {
  return StateCodec(sub_m_).index(tuple);
}

std::vector<int> ObservedProjection::decode(std::size_t symbol) const {
  return StateCodec(sub_m_).state(symbol);
}

std::vector<int> normalize_observed(std::vector<int> observed, int sites) {
  if (observed.empty()) throw ValidationError("empty observed site set");
  std::sort(observed.begin(), observed.end());
  if (std::adjacent_find(observed.begin(), observed.end()) != observed.end())
    throw ValidationError("observed site set has duplicates");
  if (observed.front() < 0 || observed.back() >= sites)
    throw ValidationError("observed site index out of range");
  return observed;
}

void require_distribution(const Vector& init, std::size_t size, double tol) {
  if (static_cast<std::size_t>(init.size()) != size)
    throw ValidationError("initial distribution has length " + std::to_string(init.size()) +
                          ", expected " + std::to_string(size));
  if (!init.allFinite() || (init.array() < 0).any())
    throw ValidationError("initial distribution has negative or non-finite entries");
  if (std::abs(init.sum() - 1.0) > tol)
    throw ValidationError("initial distribution sums to " + std::to_string(init.sum()));
}

namespace {

std::vector<std::size_t> encode_path(const ObservedProjection& proj,
                                     const ObservationSequence& path) {
  if (path.observed != proj.observed())
    throw ValidationError("observation sequence site set does not match");
  std::vector<std::size_t> symbols;
  symbols.reserve(path.values.size());
  for (const auto& tuple : path.values) symbols.push_back(proj.encode(tuple));
  return symbols;
}

}  // namespace

double observed_path_log_probability(const MasterChain& chain, const Vector& init,
                                     const ObservationSequence& path) {
  require_chain(chain);
  require_distribution(init, chain.size());
  const ObservedProjection proj(chain.m, path.observed);
  const auto symbols = encode_path(proj, path);
  if (symbols.empty()) return 0.0;

  const Eigen::Index N = chain.G.rows();
  Vector alpha = Vector::Zero(N);
  for (std::size_t s : proj.states_of(symbols[0])) alpha(s) = init(s);
  double log_p = 0;
  for (std::size_t t = 0;; ++t) {
    const double c = alpha.sum();
    if (!(c > 0)) return -std::numeric_limits<double>::infinity();
    alpha /= c;
    log_p += std::log(c);
    if (t + 1 == symbols.size()) break;
    const Vector pred = chain.G.transpose() * alpha;
    alpha.setZero();
    for (std::size_t s : proj.states_of(symbols[t + 1])) alpha(s) = pred(s);
  }
  return log_p;
}

double observed_path_probability(const MasterChain& chain, const Vector& init,
                                 const ObservationSequence& path) {
  return std::exp(observed_path_log_probability(chain, init, path));
}

double conditional_observed_probability(const MasterChain& chain, const Vector& init,
                                        const ObservationSequence& history,
                                        const std::vector<int>& next) {
  const double log_h = observed_path_log_probability(chain, init, history);
  if (!std::isfinite(log_h))
    throw ComputationError("conditioning history has zero probability");
  ObservationSequence extended = history;
  extended.values.push_back(next);
  const double log_hn = observed_path_log_probability(chain, init, extended);
  if (!std::isfinite(log_hn)) return 0.0;
  return std::exp(log_hn - log_h);
}

namespace {

struct GapSearch {
  const Matrix& G;
  const ObservedProjection& proj;
  const GapOptions& opts;
  // last_cond[t](a, b) = P(o[t+1] = b | o[t] = a)
  std::vector<Matrix> last_cond;
  MarkovianityGap result;
  std::vector<std::size_t> history;

  void visit(const Vector& alpha) {
    const std::size_t M = proj.symbols();
    const Vector pred = G.transpose() * alpha;
    std::vector<double> q(M, 0.0);
    for (std::size_t s = 0; s < proj.symbols(); ++s)
      for (std::size_t st : proj.states_of(s)) q[s] += pred(st);

    const std::size_t L = history.size();
    if (L >= 2) {
      const Matrix& lc = last_cond[L - 1];
      for (std::size_t b = 0; b < M; ++b) {
        const double given_last = lc(history.back(), b);
        const double d = std::abs(given_last - q[b]);
        if (d > result.gap) {
          result.gap = d;
          result.worst_history = history;
          result.worst_next = b;
        }
        if (opts.keep_table) result.table.push_back({history, b, given_last, q[b]});
      }
    }
    if (static_cast<int>(L) >= opts.horizon) return;
    Vector child(alpha.size());
    for (std::size_t b = 0; b < M; ++b) {
      if (!(q[b] > 0)) continue;
      child.setZero();
      for (std::size_t st : proj.states_of(b)) child(st) = pred(st) / q[b];
      history.push_back(b);
      visit(child);
      history.pop_back();
    }
  }
};

}  // namespace

MarkovianityGap markovianity_gap(const MasterChain& chain, const Vector& init,
                                 const std::vector<int>& observed, const GapOptions& opts) {
  require_chain(chain);
  require_distribution(init, chain.size());
  if (opts.horizon < 2) throw ValidationError("horizon must be at least 2");
  if (opts.horizon > opts.horizon_cap)
    throw ComputationError("horizon " + std::to_string(opts.horizon) + " exceeds the cap of " +
                           std::to_string(opts.horizon_cap));
  const ObservedProjection proj(chain.m, observed);
  const std::size_t M = proj.symbols();
  double leaves = 1;
  for (int k = 0; k < opts.horizon; ++k) leaves *= static_cast<double>(M);
  if (leaves > static_cast<double>(opts.node_cap))
    throw ComputationError("history enumeration exceeds the configured cap");

  GapSearch search{chain.G, proj, opts, {}, {}, {}};
  Vector mu = init;
  for (int t = 0; t < opts.horizon; ++t) {
    Matrix lc = Matrix::Zero(M, M);
    for (std::size_t a = 0; a < M; ++a) {
      Vector restricted = Vector::Zero(mu.size());
      double mass = 0;
      for (std::size_t s : proj.states_of(a)) {
        restricted(s) = mu(s);
        mass += mu(s);
      }
      if (!(mass > 0)) continue;
      const Vector pred = chain.G.transpose() * (restricted / mass);
      for (std::size_t b = 0; b < M; ++b)
        for (std::size_t s : proj.states_of(b)) lc(a, b) += pred(s);
    }
    search.last_cond.push_back(std::move(lc));
    mu = chain.G.transpose() * mu;
  }

  Vector alpha(init.size());
  for (std::size_t a = 0; a < M; ++a) {
    alpha.setZero();
    double mass = 0;
    for (std::size_t s : proj.states_of(a)) {
      alpha(s) = init(s);
      mass += init(s);
    }
    if (!(mass > 0)) continue;
    alpha /= mass;
    search.history = {a};
    search.visit(alpha);
  }
  return std::move(search.result);
}

Matrix lumped_one_step_chain(const MasterChain& chain, const Vector& init,
                             const std::vector<int>& observed) {
  require_chain(chain);
  require_distribution(init, chain.size());
  const ObservedProjection proj(chain.m, observed);
  const std::size_t M = proj.symbols();
  Matrix L = Matrix::Zero(M, M);
  for (std::size_t a = 0; a < M; ++a) {
    double mass = 0;
    Vector flow = Vector::Zero(chain.G.cols());
    for (std::size_t s : proj.states_of(a)) {
      mass += init(s);
      flow += init(s) * chain.G.row(s).transpose();
    }
    if (!(mass > 0))
      throw ComputationError("observed status " + std::to_string(a + 1) +
                             " has zero mass under the initial distribution");
    for (std::size_t b = 0; b < M; ++b)
      for (std::size_t s : proj.states_of(b)) L(a, b) += flow(s);
    L.row(a) /= mass;
  }
  return L;
}

}  // namespace infmodel
