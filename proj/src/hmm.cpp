#include <cmath>
#include <limits>

#include "infmodel/estimation.hpp"

namespace infmodel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<std::size_t> symbols_of(const ObservedProjection& proj, const ObservationSequence& obs) {
  if (obs.observed != proj.observed())
    throw ValidationError("observation sequence site set is not sorted or does not match");
  std::vector<std::size_t> sym;
  sym.reserve(obs.values.size());
  for (const auto& tuple : obs.values) sym.push_back(proj.encode(tuple));
  return sym;
}

Vector dirichlet_vector(UniformRng& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = -std::log1p(-rng.next());
  return v / v.sum();
}

// Forward-backward over the states consistent with each symbol. Every symbol
// owns the same number h of joint states.
class ForwardBackward {
 public:
  ForwardBackward(const ObservedProjection& proj, std::vector<std::size_t> sym)
      : proj_(proj), sym_(std::move(sym)), h_(proj.states_of(0).size()),
        alpha_(sym_.size() * h_), scale_(sym_.size()), beta_(h_), beta_prev_(h_) {}

  // Log-likelihood at (G, init); accumulates expected transition counts and
  // the posterior of the first state. Returns -inf for an impossible sequence.
  double expect(const Matrix& G, const Vector& init, Matrix& xi, Vector& gamma0) {
    const std::size_t T = sym_.size();
    const std::size_t h = h_;
    double ll = 0;
    {
      const auto& S = proj_.states_of(sym_[0]);
      double c = 0;
      for (std::size_t a = 0; a < h; ++a) c += alpha_[a] = init(S[a]);
      if (!(c > 0)) return kNegInf;
      for (std::size_t a = 0; a < h; ++a) alpha_[a] /= c;
      scale_[0] = c;
      ll += std::log(c);
    }
    for (std::size_t t = 1; t < T; ++t) {
      const auto& P = proj_.states_of(sym_[t - 1]);
      const auto& S = proj_.states_of(sym_[t]);
      const double* prev = &alpha_[(t - 1) * h];
      double* cur = &alpha_[t * h];
      double c = 0;
      for (std::size_t b = 0; b < h; ++b) {
        double v = 0;
        for (std::size_t a = 0; a < h; ++a) v += prev[a] * G(P[a], S[b]);
        cur[b] = v;
        c += v;
      }
      if (!(c > 0) || !std::isfinite(c)) return kNegInf;
      for (std::size_t b = 0; b < h; ++b) cur[b] /= c;
      scale_[t] = c;
      ll += std::log(c);
    }

    xi.setZero(G.rows(), G.cols());
    std::fill(beta_.begin(), beta_.end(), 1.0);
    for (std::size_t t = T; t-- > 1;) {
      const auto& P = proj_.states_of(sym_[t - 1]);
      const auto& S = proj_.states_of(sym_[t]);
      const double* prev = &alpha_[(t - 1) * h];
      const double inv = 1.0 / scale_[t];
      for (std::size_t a = 0; a < h; ++a) {
        double acc = 0;
        for (std::size_t b = 0; b < h; ++b) {
          const double w = G(P[a], S[b]) * beta_[b] * inv;
          acc += w;
          xi(P[a], S[b]) += prev[a] * w;
        }
        beta_prev_[a] = acc;
      }
      beta_.swap(beta_prev_);
    }
    gamma0.setZero(G.rows());
    const auto& S0 = proj_.states_of(sym_[0]);
    double total = 0;
    for (std::size_t a = 0; a < h; ++a) total += gamma0(S0[a]) = alpha_[a] * beta_[a];
    if (total > 0) gamma0 /= total;
    return ll;
  }

  double log_likelihood(const Matrix& G, const Vector& init) {
    Matrix xi;
    Vector g0;
    return expect(G, init, xi, g0);
  }

 private:
  const ObservedProjection& proj_;
  std::vector<std::size_t> sym_;
  std::size_t h_;
  std::vector<double> alpha_, scale_, beta_, beta_prev_;
};

struct BwRun {
  Matrix G;
  Vector init;
  HmmRestart info;
};

BwRun run_baum_welch(ForwardBackward& fb, Matrix G, Vector init, const EmConfig& cfg) {
  BwRun run;
  Matrix xi;
  Vector gamma0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const double ll = fb.expect(G, init, xi, gamma0);
    if (!std::isfinite(ll)) {
      run.info.degenerate = true;
      break;
    }
    run.info.trace.push_back(ll);
    const std::size_t k = run.info.trace.size();
    if (k >= 2 && run.info.trace[k - 1] - run.info.trace[k - 2] <= cfg.tol * std::abs(ll)) {
      run.info.converged = true;
      break;
    }
    xi.array() += cfg.smoothing;
    G = xi.array().colwise() / xi.rowwise().sum().array();
    init = gamma0;
    ++run.info.iterations;
  }
  if (!run.info.converged && !run.info.degenerate) {
    const double ll = fb.log_likelihood(G, init);
    if (std::isfinite(ll))
      run.info.trace.push_back(ll);
    else
      run.info.degenerate = true;
  }
  run.info.log_likelihood = run.info.degenerate || run.info.trace.empty()
                                ? kNegInf
                                : run.info.trace.back();
  run.G = std::move(G);
  run.init = std::move(init);
  return run;
}

void require_obs(const ObservationSequence& obs, std::size_t N) {
  if (obs.values.empty()) throw ValidationError("observation sequence is empty");
  if (N == 0) throw ValidationError("empty joint state space");
}

}  // namespace

double forward_log_likelihood(const ObservationSequence& obs, const MasterChain& chain,
                              const Vector& init) {
  require_chain(chain);
  require_distribution(init, chain.size());
  const ObservedProjection proj(chain.m, obs.observed);
  const auto sym = symbols_of(proj, obs);
  if (sym.empty()) return 0.0;

  // Sparse scaled forward pass over consistent states only.
  std::vector<double> prev, cur;
  const auto* P = &proj.states_of(sym[0]);
  prev.resize(P->size());
  double c = 0;
  for (std::size_t a = 0; a < P->size(); ++a) c += prev[a] = init((*P)[a]);
  if (!(c > 0)) return kNegInf;
  double ll = std::log(c);
  for (double& v : prev) v /= c;
  for (std::size_t t = 1; t < sym.size(); ++t) {
    const auto& S = proj.states_of(sym[t]);
    cur.assign(S.size(), 0.0);
    c = 0;
    for (std::size_t b = 0; b < S.size(); ++b) {
      for (std::size_t a = 0; a < P->size(); ++a) cur[b] += prev[a] * chain.G((*P)[a], S[b]);
      c += cur[b];
    }
    if (!(c > 0)) return kNegInf;
    ll += std::log(c);
    for (double& v : cur) v /= c;
    prev.swap(cur);
    P = &S;
  }
  return ll;
}

HMMEstimate baum_welch_from(const ObservationSequence& obs, const std::vector<int>& m,
                            const Matrix& G0, const Vector& init0, const EmConfig& config) {
  const ObservedProjection proj(m, obs.observed);
  const std::size_t N = StateCodec(m).size();
  require_obs(obs, N);
  require_chain(MasterChain{G0, m}, kStochasticTolerance);
  require_distribution(init0, N);
  ForwardBackward fb(proj, symbols_of(proj, obs));
  auto run = run_baum_welch(fb, G0, init0, config);
  if (run.info.degenerate) throw ComputationError("Baum-Welch run degenerated");
  HMMEstimate out{m, proj.observed(), std::move(run.G), std::move(run.init), run.info.trace, {}, 0};
  out.restarts.push_back(std::move(run.info));
  return out;
}

HMMEstimate baum_welch_poim(const ObservationSequence& obs, const std::vector<int>& m,
                            const EmConfig& config) {
  const ObservedProjection proj(m, obs.observed);
  const std::size_t N = StateCodec(m).size();
  require_obs(obs, N);
  if (config.restarts < 1) throw ValidationError("at least one restart is required");
  ForwardBackward fb(proj, symbols_of(proj, obs));
  UniformRng rng(config.seed);

  std::vector<BwRun> runs;
  for (int r = 0; r < config.restarts; ++r) {
    Matrix G0(N, N);
    for (std::size_t s = 0; s < N; ++s) G0.row(s) = dirichlet_vector(rng, N).transpose();
    Vector init0 = dirichlet_vector(rng, N);
    runs.push_back(run_baum_welch(fb, std::move(G0), std::move(init0), config));
    runs.back().info.index = static_cast<std::size_t>(r);
  }

  std::size_t best = runs.size();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs[r].info.degenerate) continue;
    if (best == runs.size() || runs[r].info.log_likelihood > runs[best].info.log_likelihood)
      best = r;
  }
  if (best == runs.size()) {
    std::string msg = "all Baum-Welch restarts degenerated; iterations per restart:";
    for (const auto& r : runs) msg += " " + std::to_string(r.info.iterations);
    throw ComputationError(msg);
  }

  HMMEstimate out{m, proj.observed(), runs[best].G, runs[best].init, runs[best].info.trace, {}, best};
  for (auto& r : runs) out.restarts.push_back(std::move(r.info));
  return out;
}

PoimFit identify_poim(const ObservationSequence& obs, const ModelStructure& structure,
                      const EmConfig& em, const RecoverConfig& recover,
                      std::size_t max_relabelings) {
  structure.validate();
  PoimFit fit{baum_welch_poim(obs, structure.m, em), {}, false,
              {InfluenceModel::homogeneous(Matrix::Ones(1, 1), Matrix::Ones(1, 1), {1}), 0, 0,
               false, {}, {}, 0}};
  const std::size_t N = StateCodec(structure.m).size();

  std::vector<std::vector<std::size_t>> candidates;
  try {
    candidates = hidden_relabelings(structure.m, fit.hmm.observed, max_relabelings);
    fit.relabeling_searched = true;
  } catch (const ComputationError&) {
    std::vector<std::size_t> id(N);
    for (std::size_t s = 0; s < N; ++s) id[s] = s;
    candidates = {id};
  }

  const std::vector<bool> all(N, true);
  bool have = false;
  for (const auto& p : candidates) {
    Matrix G(N, N);
    for (std::size_t a = 0; a < N; ++a)
      for (std::size_t b = 0; b < N; ++b) G(a, b) = fit.hmm.G_hat(p[a], p[b]);
    auto est = recover_influence_params(G, all, structure, recover);
    if (!have || est.objective < fit.params.objective) {
      fit.params = std::move(est);
      fit.relabeling = p;
      have = true;
    }
  }
  return fit;
}

}  // namespace infmodel
