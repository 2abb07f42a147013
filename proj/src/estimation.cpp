#include "infmodel/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "params.hpp"

namespace infmodel {

ModelStructure ModelStructure::dense(std::vector<int> m, bool shared_local) {
  const std::size_t n = m.size();
  return {std::move(m), shared_local,
          std::vector<std::vector<bool>>(n, std::vector<bool>(n, true))};
}

ModelStructure ModelStructure::of(const InfluenceModel& model) {
  const int n = model.sites();
  ModelStructure s{model.status_counts(), model.is_homogeneous(),
                   std::vector<std::vector<bool>>(n, std::vector<bool>(n, false))};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s.network_support[i][j] = model.network()(i, j) > 0;
  return s;
}

void ModelStructure::validate() const {
  const std::size_t n = m.size();
  if (n == 0) throw ValidationError("structure has no sites");
  for (int mi : m)
    if (mi < 1 || (n > 1 && mi < 2)) throw ValidationError("structure has a site with too few statuses");
  if (shared_local && std::adjacent_find(m.begin(), m.end(), std::not_equal_to<>()) != m.end())
    throw ValidationError("a shared local matrix requires equal status counts");
  if (network_support.size() != n)
    throw ValidationError("network support has the wrong number of rows");
  for (const auto& row : network_support) {
    if (row.size() != n) throw ValidationError("network support has the wrong number of columns");
    if (std::none_of(row.begin(), row.end(), [](bool b) { return b; }))
      throw ValidationError("every site needs at least one influencing site");
  }
}

FullObsEstimate estimate_G_counting(const Trajectory& traj, const MasterChain* truth) {
  if (traj.steps() < 1) throw ValidationError("counting estimation needs at least one transition");
  FullObsEstimate est;
  est.counts = empirical_transition_counts(traj);
  const Eigen::Index N = est.counts.rows();
  est.G_hat = Matrix::Zero(N, N);
  est.visited.assign(static_cast<std::size_t>(N), false);
  for (Eigen::Index s = 0; s < N; ++s) {
    const double total = est.counts.row(s).sum();
    if (total > 0) {
      est.G_hat.row(s) = est.counts.row(s) / total;
      est.visited[s] = true;
    }
  }
  if (truth) {
    if (truth->m != traj.m) throw ValidationError("true chain does not match the trajectory");
    est.recurrence_ok = single_recurrent_class(*truth);
    est.recurrence_empirical = false;
  } else {
    const bool all = std::all_of(est.visited.begin(), est.visited.end(), [](bool v) { return v; });
    const auto dec = communicating_classes(est.G_hat);
    est.recurrence_ok = all && dec.classes.size() == 1;
    est.recurrence_empirical = true;
  }
  return est;
}

// ---------------------------------------------------------------------------
// Direct EM, fully observed.

namespace {

// C[i](s, b): transitions out of joint state s in which site i moves to b.
std::vector<Matrix> site_statistics(const Trajectory& traj) {
  const StateCodec codec(traj.m);
  const int n = codec.sites();
  std::vector<Matrix> C(n);
  for (int i = 0; i < n; ++i) C[i] = Matrix::Zero(codec.size(), traj.m[i]);
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    const std::size_t s = traj.states[k];
    const std::size_t t = traj.states[k + 1];
    for (int i = 0; i < n; ++i) C[i](s, codec.status(t, i)) += 1.0;
  }
  return C;
}

struct EmState {
  const detail::ParamLayout& layout;
  const StateCodec& codec;
  const std::vector<Matrix>& C;
  double smoothing;

  // One E-step at x. Returns the log-likelihood at x and writes the M-step
  // update into x_next. -inf when an observed transition has probability 0.
  double step(const std::vector<double>& x, std::vector<double>& x_next) const {
    const auto& st = layout.structure();
    const int n = st.sites();
    std::vector<double> num(x.size(), 0.0);
    std::vector<double> contrib(n);
    double ll = 0;
    for (int i = 0; i < n; ++i) {
      const Matrix& Ci = C[i];
      for (Eigen::Index s = 0; s < Ci.rows(); ++s) {
        for (Eigen::Index b = 0; b < Ci.cols(); ++b) {
          const double c = Ci(s, b);
          if (c == 0) continue;
          double p = 0;
          for (int j = 0; j < n; ++j) {
            const long d = layout.d_index(i, j);
            contrib[j] = 0;
            if (d < 0) continue;
            const int sj = codec.status(static_cast<std::size_t>(s), j);
            contrib[j] = x[static_cast<std::size_t>(d)] *
                         x[layout.a_index(j, i, sj) + static_cast<std::size_t>(b)];
            p += contrib[j];
          }
          if (!(p > 0)) return -std::numeric_limits<double>::infinity();
          ll += c * std::log(p);
          for (int j = 0; j < n; ++j) {
            if (contrib[j] == 0) continue;
            const double r = c * contrib[j] / p;
            num[static_cast<std::size_t>(layout.d_index(i, j))] += r;
            const int sj = codec.status(static_cast<std::size_t>(s), j);
            num[layout.a_index(j, i, sj) + static_cast<std::size_t>(b)] += r;
          }
        }
      }
    }
    x_next.assign(x.size(), 0.0);
    for (const auto& blk : layout.blocks()) {
      double total = 0;
      for (std::size_t k = 0; k < blk.size; ++k) total += num[blk.offset + k] + smoothing;
      for (std::size_t k = 0; k < blk.size; ++k)
        x_next[blk.offset + k] = (num[blk.offset + k] + smoothing) / total;
    }
    return ll;
  }
};

std::vector<double> to_params(const detail::ParamLayout& layout, const InfluenceModel& model) {
  const auto& st = layout.structure();
  const int n = st.sites();
  std::vector<double> x(layout.size(), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const long d = layout.d_index(i, j);
      if (d < 0) continue;
      x[static_cast<std::size_t>(d)] = model.network()(i, j);
      const Matrix* A = model.local(j, i);
      if (!A) throw ValidationError("starting model lacks a local matrix the structure needs");
      for (int r = 0; r < st.m[j]; ++r)
        for (int c = 0; c < st.m[i]; ++c)
          x[layout.a_index(j, i, r) + static_cast<std::size_t>(c)] = (*A)(r, c);
    }
  return x;
}

struct EmRun {
  std::vector<double> x;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

EmRun run_em(const EmState& em, std::vector<double> x, const EmConfig& cfg) {
  EmRun run;
  std::vector<double> next;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const double ll = em.step(x, next);
    if (!std::isfinite(ll)) {
      if (it == 0) throw ComputationError("zero-probability transition under the starting parameters");
      throw ComputationError("EM reached a zero-probability transition");
    }
    run.trace.push_back(ll);
    ++run.iterations;
    const std::size_t k = run.trace.size();
    if (k >= 2 && run.trace[k - 1] - run.trace[k - 2] <= cfg.tol * std::abs(run.trace[k - 1])) {
      run.converged = true;
      break;
    }
    x.swap(next);
  }
  if (!run.converged) {
    // Record the likelihood of the parameters actually returned.
    const double ll = em.step(x, next);
    if (!std::isfinite(ll)) throw ComputationError("EM reached a zero-probability transition");
    run.trace.push_back(ll);
  }
  run.x = std::move(x);
  return run;
}

}  // namespace

double full_obs_log_likelihood(const InfluenceModel& model, const Trajectory& traj) {
  model.require_valid();
  if (model.status_counts() != traj.m) throw ValidationError("model does not match the trajectory");
  const StateCodec codec(traj.m);
  const int n = model.sites();
  double ll = 0;
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    const JointState s = codec.state(traj.states[k]);
    for (int i = 0; i < n; ++i) {
      const Vector p = next_status_distribution(model, s, i);
      ll += std::log(p(codec.status(traj.states[k + 1], i)));
    }
  }
  return ll;
}

InfluenceParamEstimate direct_em_full_obs_from(const Trajectory& traj,
                                               const InfluenceModel& start,
                                               const EmConfig& config) {
  start.require_valid();
  if (traj.steps() < 1) throw ValidationError("EM needs at least one transition");
  if (start.status_counts() != traj.m)
    throw ValidationError("starting model does not match the trajectory");
  const detail::ParamLayout layout(ModelStructure::of(start));
  const StateCodec codec(traj.m);
  const auto C = site_statistics(traj);
  const EmState em{layout, codec, C, config.smoothing};
  auto run = run_em(em, to_params(layout, start), config);
  InfluenceParamEstimate out{layout.to_model(run.x), run.trace.back(), run.iterations,
                             run.converged, run.trace, {}, 0};
  out.restarts.push_back({0, out.objective, run.iterations, run.converged});
  return out;
}

InfluenceParamEstimate direct_em_full_obs(const Trajectory& traj, const ModelStructure& structure,
                                          const EmConfig& config) {
  if (traj.steps() < 1) throw ValidationError("EM needs at least one transition");
  if (structure.m != traj.m) throw ValidationError("structure does not match the trajectory");
  if (config.restarts < 1) throw ValidationError("at least one restart is required");
  const detail::ParamLayout layout(structure);
  const StateCodec codec(traj.m);
  const auto C = site_statistics(traj);
  const EmState em{layout, codec, C, config.smoothing};
  UniformRng rng(config.seed);

  std::vector<EmRun> runs;
  std::vector<RestartSummary> summaries;
  for (int r = 0; r < config.restarts; ++r) {
    std::vector<double> x0 = layout.dirichlet(rng);
    EmRun run;
    try {
      run = run_em(em, x0, config);
    } catch (const ComputationError&) {
      // Restart from the Dirichlet draw pulled halfway to uniform.
      for (const auto& b : layout.blocks())
        for (std::size_t k = 0; k < b.size; ++k)
          x0[b.offset + k] = 0.5 * x0[b.offset + k] + 0.5 / static_cast<double>(b.size);
      run = run_em(em, x0, config);
    }
    summaries.push_back({static_cast<std::size_t>(r), run.trace.back(), run.iterations, run.converged});
    runs.push_back(std::move(run));
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (summaries[r].objective > summaries[best].objective) best = r;

  InfluenceParamEstimate out{layout.to_model(runs[best].x), summaries[best].objective,
                             runs[best].iterations, runs[best].converged, runs[best].trace,
                             summaries, best};
  out.near_optimal = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (summaries[best].objective - summaries[r].objective >
        1e-9 * std::abs(summaries[best].objective))
      continue;
    ++out.near_optimal;
    out.dispersion = std::max(out.dispersion, detail::max_abs_diff(runs[r].x, runs[best].x));
  }
  out.unique_optimum = out.dispersion < 1e-4;
  return out;
}

// ---------------------------------------------------------------------------
// Permutation matching.

std::vector<std::vector<std::size_t>> hidden_relabelings(const std::vector<int>& m,
                                                         const std::vector<int>& observed,
                                                         std::size_t cap) {
  const ObservedProjection proj(m, observed);
  double count = 1;
  for (std::size_t a = 0; a < proj.symbols(); ++a)
    count *= std::tgamma(static_cast<double>(proj.states_of(a).size()) + 1.0);
  if (count > static_cast<double>(cap))
    throw ComputationError("hidden relabeling search space (" + std::to_string(count) +
                           ") exceeds the cap of " + std::to_string(cap));

  const std::size_t N = StateCodec(m).size();
  std::vector<std::vector<std::size_t>> blocks;
  for (std::size_t a = 0; a < proj.symbols(); ++a) blocks.push_back(proj.states_of(a));

  std::vector<std::vector<std::size_t>> out;
  std::vector<std::vector<std::size_t>> current = blocks;  // image of each block
  // Odometer over per-block permutations; the last block varies fastest.
  for (;;) {
    std::vector<std::size_t> perm(N);
    for (std::size_t a = 0; a < blocks.size(); ++a)
      for (std::size_t k = 0; k < blocks[a].size(); ++k) perm[blocks[a][k]] = current[a][k];
    out.push_back(std::move(perm));
    std::size_t a = blocks.size();
    bool advanced = false;
    while (a-- > 0) {
      if (std::next_permutation(current[a].begin(), current[a].end())) {
        advanced = true;
        break;
      }
      // next_permutation wrapped the block back to sorted order; carry.
    }
    if (!advanced) break;
  }
  return out;
}

PermutationMatchReport permutation_match(const Matrix& G_est, const Matrix& G_true,
                                         const std::vector<int>& observed,
                                         const std::vector<int>& m, std::size_t cap) {
  const std::size_t N = StateCodec(m).size();
  if (static_cast<std::size_t>(G_est.rows()) != N || G_est.rows() != G_est.cols() ||
      G_true.rows() != G_est.rows() || G_true.cols() != G_est.cols())
    throw ValidationError("matrices do not match the joint state space");

  const auto perms = hidden_relabelings(m, observed, cap);
  PermutationMatchReport rep;
  rep.candidates = perms.size();
  rep.error = std::numeric_limits<double>::infinity();
  for (const auto& p : perms) {
    double err = 0;
    for (std::size_t a = 0; a < N && err < rep.error; ++a)
      for (std::size_t b = 0; b < N; ++b)
        err = std::max(err, std::abs(G_est(p[a], p[b]) - G_true(a, b)));
    if (err < rep.error) {
      rep.error = err;
      rep.permutation = p;
    }
  }
  rep.residuals.resize(N, N);
  for (std::size_t a = 0; a < N; ++a)
    for (std::size_t b = 0; b < N; ++b)
      rep.residuals(a, b) = G_est(rep.permutation[a], rep.permutation[b]) - G_true(a, b);
  return rep;
}

}  // namespace infmodel
