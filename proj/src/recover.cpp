#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "infmodel/estimation.hpp"
#include "params.hpp"

namespace infmodel {

namespace {

void require_fit_input(const Matrix& G_hat, const std::vector<bool>& visited, std::size_t N) {
  if (static_cast<std::size_t>(G_hat.rows()) != N || G_hat.rows() != G_hat.cols())
    throw ValidationError("estimated chain does not match the structure's joint space");
  if (visited.size() != N) throw ValidationError("visited mask has the wrong length");
  for (std::size_t s = 0; s < N; ++s) {
    if (!visited[s]) continue;
    const auto row = G_hat.row(static_cast<Eigen::Index>(s));
    if ((row.array() < 0).any() || std::abs(row.sum() - 1.0) > kStochasticTolerance)
      throw ValidationError("visited row " + std::to_string(s + 1) +
                            " of the estimated chain is not a probability vector");
  }
}

// Squared fit error and its gradient with respect to the flat parameters.
class FitObjective {
 public:
  FitObjective(const detail::ParamLayout& layout, const Matrix& G_hat,
               const std::vector<bool>& visited)
      : layout_(layout), G_hat_(G_hat), visited_(visited), codec_(layout.structure().m) {}

  double operator()(const std::vector<double>& x, std::vector<double>* grad) const {
    const auto& st = layout_.structure();
    const int n = st.sites();
    const std::size_t N = codec_.size();
    if (grad) grad->assign(x.size(), 0.0);

    std::vector<std::vector<double>> p(n), dp(n);
    for (int i = 0; i < n; ++i) {
      p[i].resize(st.m[i]);
      dp[i].resize(st.m[i]);
    }
    std::vector<double> prefix(n + 1), suffix(n + 1);
    double f = 0;
    for (std::size_t s = 0; s < N; ++s) {
      if (!visited_[s]) continue;
      for (int i = 0; i < n; ++i) {
        std::fill(p[i].begin(), p[i].end(), 0.0);
        for (int j = 0; j < n; ++j) {
          const long d = layout_.d_index(i, j);
          if (d < 0) continue;
          const std::size_t a = layout_.a_index(j, i, codec_.status(s, j));
          for (int k = 0; k < st.m[i]; ++k) p[i][k] += x[static_cast<std::size_t>(d)] * x[a + k];
        }
        if (grad) std::fill(dp[i].begin(), dp[i].end(), 0.0);
      }
      for (std::size_t t = 0; t < N; ++t) {
        prefix[0] = 1;
        for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] * p[i][codec_.status(t, i)];
        const double r = prefix[n] - G_hat_(s, t);
        f += r * r;
        if (!grad) continue;
        suffix[n] = 1;
        for (int i = n; i-- > 0;) suffix[i] = suffix[i + 1] * p[i][codec_.status(t, i)];
        for (int i = 0; i < n; ++i) dp[i][codec_.status(t, i)] += 2 * r * prefix[i] * suffix[i + 1];
      }
      if (!grad) continue;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const long d = layout_.d_index(i, j);
          if (d < 0) continue;
          const std::size_t a = layout_.a_index(j, i, codec_.status(s, j));
          const double w = x[static_cast<std::size_t>(d)];
          double gd = 0;
          for (int k = 0; k < st.m[i]; ++k) {
            gd += dp[i][k] * x[a + k];
            (*grad)[a + k] += w * dp[i][k];
          }
          (*grad)[static_cast<std::size_t>(d)] += gd;
        }
      }
    }
    return f;
  }

 private:
  const detail::ParamLayout& layout_;
  const Matrix& G_hat_;
  const std::vector<bool>& visited_;
  StateCodec codec_;
};

struct SpgResult {
  std::vector<double> x;
  double f = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

// Spectral projected gradient with a nonmonotone Armijo search.
SpgResult spg(const FitObjective& obj, const detail::ParamLayout& layout, std::vector<double> x,
              const RecoverConfig& cfg) {
  constexpr int kMemory = 10;
  constexpr double kGamma = 1e-4;
  // Steps are capped so that x - step * g stays at a magnitude where the
  // sort-based projection is still accurate.
  constexpr double kStepMin = 1e-12, kStepMax = 1e6;
  std::vector<double> buf;
  auto project = [&](std::vector<double>& v) {
    for (const auto& b : layout.blocks()) detail::project_simplex(v.data() + b.offset, b.size, buf);
  };
  project(x);

  SpgResult res;
  std::vector<double> g, g_new, trial(x.size()), d(x.size()), x_new;
  double f = obj(x, &g);
  std::deque<double> history{f};
  res.trace.push_back(f);

  auto pg_norm = [&](const std::vector<double>& xv, const std::vector<double>& gv) {
    for (std::size_t k = 0; k < xv.size(); ++k) trial[k] = xv[k] - gv[k];
    project(trial);
    double nrm = 0;
    for (std::size_t k = 0; k < xv.size(); ++k) nrm = std::max(nrm, std::abs(trial[k] - xv[k]));
    return nrm;
  };

  double step = std::clamp(1.0 / std::max(pg_norm(x, g), 1e-300), kStepMin, kStepMax);
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (pg_norm(x, g) <= cfg.tol || f == 0) {
      res.converged = true;
      break;
    }
    for (std::size_t k = 0; k < x.size(); ++k) trial[k] = x[k] - step * g[k];
    project(trial);
    double gd = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      d[k] = trial[k] - x[k];
      gd += g[k] * d[k];
    }
    const double f_ref = *std::max_element(history.begin(), history.end());
    double lambda = 1;
    double f_new = 0;
    x_new.resize(x.size());
    for (;;) {
      for (std::size_t k = 0; k < x.size(); ++k) x_new[k] = x[k] + lambda * d[k];
      f_new = obj(x_new, nullptr);
      if (f_new <= f_ref + kGamma * lambda * gd || lambda < 1e-20) break;
      // Safeguarded quadratic interpolation.
      const double denom = 2 * (f_new - f - lambda * gd);
      double l = denom > 0 ? -gd * lambda * lambda / denom : 0.5 * lambda;
      lambda = std::clamp(l, 0.1 * lambda, 0.5 * lambda);
    }
    if (lambda < 1e-20) {
      // No decrease left at rounding level; accept if nearly stationary.
      res.converged = pg_norm(x, g) <= 1e-8;
      break;
    }
    obj(x_new, &g_new);
    double ss = 0, sy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double s = x_new[k] - x[k];
      ss += s * s;
      sy += s * (g_new[k] - g[k]);
    }
    step = sy > 0 ? std::clamp(ss / sy, kStepMin, kStepMax) : kStepMax;
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    res.trace.push_back(f);
    history.push_back(f);
    if (history.size() > kMemory) history.pop_front();
    ++res.iterations;
  }
  res.x = std::move(x);
  res.f = f;
  return res;
}

}  // namespace

double influence_fit_objective(const InfluenceModel& model, const Matrix& G_hat,
                               const std::vector<bool>& visited) {
  model.require_valid();
  const std::size_t N = model.joint_size();
  require_fit_input(G_hat, visited, N);
  const MasterChain chain = build_master_chain(model);
  double f = 0;
  for (std::size_t s = 0; s < N; ++s) {
    if (!visited[s]) continue;
    f += (chain.G.row(s) - G_hat.row(s)).squaredNorm();
  }
  return f;
}

InfluenceParamEstimate recover_influence_params(const Matrix& G_hat,
                                                const std::vector<bool>& visited,
                                                const ModelStructure& structure,
                                                const RecoverConfig& config) {
  if (config.restarts < 1) throw ValidationError("at least one restart is required");
  const detail::ParamLayout layout(structure);
  const std::size_t N = StateCodec(structure.m).size();
  require_fit_input(G_hat, visited, N);

  if (structure.sites() == 1) {
    // No network: the local matrix is the chain itself.
    const int mm = structure.m[0];
    Matrix A = Matrix::Constant(mm, mm, 1.0 / mm);
    for (int s = 0; s < mm; ++s)
      if (visited[s]) A.row(s) = G_hat.row(s);
    InfluenceModel model = InfluenceModel::homogeneous(Matrix::Ones(1, 1), A, structure.m);
    const double f = influence_fit_objective(model, G_hat, visited);
    InfluenceParamEstimate out{std::move(model), f, 0, true, {f}, {{0, f, 0, true}}, 0};
    return out;
  }

  const FitObjective obj(layout, G_hat, visited);
  UniformRng rng(config.seed);
  std::vector<SpgResult> runs;
  std::vector<RestartSummary> summaries;
  for (int r = 0; r < config.restarts; ++r) {
    runs.push_back(spg(obj, layout, layout.dirichlet(rng), config));
    summaries.push_back({static_cast<std::size_t>(r), runs.back().f, runs.back().iterations,
                         runs.back().converged});
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].f < runs[best].f) best = r;

  InfluenceParamEstimate out{layout.to_model(runs[best].x), runs[best].f, runs[best].iterations,
                             runs[best].converged, runs[best].trace, summaries, best};
  out.near_optimal = 0;
  for (const auto& run : runs) {
    if (run.f > runs[best].f + config.near_optimal_gap) continue;
    ++out.near_optimal;
    out.dispersion = std::max(out.dispersion, detail::max_abs_diff(run.x, runs[best].x));
  }
  out.unique_optimum = out.dispersion < config.dispersion_tol;
  return out;
}

}  // namespace infmodel
