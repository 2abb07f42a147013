#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>

#include "infmodel/estimation.hpp"
#include "infmodel/reproduce.hpp"
#include "oracles.hpp"

using namespace infmodel;

namespace {

double max_abs(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

double largest_drop(const std::vector<double>& trace) {
  double d = 0;
  for (std::size_t k = 1; k < trace.size(); ++k) d = std::max(d, trace[k - 1] - trace[k]);
  return d;
}

Matrix relabel(const Matrix& G, const std::vector<std::size_t>& p) {
  Matrix out(G.rows(), G.cols());
  for (Eigen::Index a = 0; a < G.rows(); ++a)
    for (Eigen::Index b = 0; b < G.cols(); ++b) out(a, b) = G(p[a], p[b]);
  return out;
}

const MasterChain& reference_chain() {
  static const MasterChain chain = build_master_chain(reference_model());
  return chain;
}

const Trajectory& reference_run() {
  static const Trajectory traj =
      sample_trajectory(reference_model(), 1000000, stationary_distribution(reference_chain()).pi, 0);
  return traj;
}

}  // namespace

// --- counting ----------------------------------------------------------------

TEST_CASE("counting estimate on a long reference run") {
  const auto est = estimate_G_counting(reference_run(), &reference_chain());
  CHECK(max_abs(est.G_hat, reference_chain().G) < 5e-3);
  CHECK(std::all_of(est.visited.begin(), est.visited.end(), [](bool v) { return v; }));
  CHECK(est.recurrence_ok);
  CHECK_FALSE(est.recurrence_empirical);
  for (Eigen::Index r = 0; r < 4; ++r) CHECK(std::abs(est.G_hat.row(r).sum() - 1) <= 1e-12);
  CHECK(est.counts.sum() == 1000000);
}

TEST_CASE("absorbed copy-model run leaves rows unvisited") {
  const auto model = binary_copy_model(2);
  const MasterChain chain = build_master_chain(model);
  const auto traj = sample_trajectory(model, 500, JointState{0, 1}, 0);
  const auto est = estimate_G_counting(traj, &chain);
  CHECK_FALSE(est.recurrence_ok);
  const std::size_t end = traj.states.back();
  REQUIRE((end == 0 || end == 3));
  const std::size_t other = end == 0 ? 3 : 0;
  CHECK_FALSE(est.visited[other]);
  CHECK(est.G_hat.row(other).isZero());
  CHECK(est.G_hat(end, end) == 1.0);

  const auto empirical = estimate_G_counting(traj);
  CHECK(empirical.recurrence_empirical);
  CHECK_FALSE(empirical.recurrence_ok);
}

TEST_CASE("runs absorbed in different consensus states see different rows") {
  const auto model = binary_copy_model(3);
  const std::size_t low = 0, high = 7;
  std::optional<FullObsEstimate> to_low, to_high;
  for (std::uint64_t seed = 0; seed < 50 && !(to_low && to_high); ++seed) {
    const JointState start = seed % 2 ? JointState{0, 1, 1} : JointState{1, 0, 0};
    const auto traj = sample_trajectory(model, 200, start, seed);
    if (traj.states.back() == low && !to_low) to_low = estimate_G_counting(traj);
    if (traj.states.back() == high && !to_high) to_high = estimate_G_counting(traj);
  }
  REQUIRE(to_low);
  REQUIRE(to_high);
  CHECK(to_low->visited[low]);
  CHECK_FALSE(to_low->visited[high]);
  CHECK(to_high->visited[high]);
  CHECK_FALSE(to_high->visited[low]);
  CHECK_FALSE(to_low->recurrence_ok);
  CHECK_FALSE(to_high->recurrence_ok);
  // Each run is silent exactly where the other is informative about absorption.
  CHECK(to_low->G_hat(low, low) == 1.0);
  CHECK(to_high->G_hat(high, high) == 1.0);
}

TEST_CASE("deterministic cycle is recovered exactly after one lap") {
  Matrix P = Matrix::Zero(3, 3);
  P(0, 1) = P(1, 2) = P(2, 0) = 1;
  const auto model = InfluenceModel::homogeneous(Matrix::Ones(1, 1), P, {3});
  const auto traj = sample_trajectory(model, 3, JointState{0}, 0);
  const auto est = estimate_G_counting(traj);
  CHECK(max_abs(est.G_hat, P) == 0);
  CHECK(est.recurrence_ok);
}

// --- recovery -----------------------------------------------------------------

TEST_CASE("exact chain gives back the reference parameters") {
  const auto truth = reference_model();
  const auto est = recover_influence_params(reference_chain().G, std::vector<bool>(4, true),
                                            ModelStructure::dense({2, 2}, true));
  CHECK(est.objective < 1e-12);
  CHECK(max_abs(est.model.network(), truth.network()) <= 1e-6);
  CHECK(max_abs(*est.model.shared_local(), *truth.shared_local()) <= 1e-6);
  CHECK(est.converged);
  CHECK(est.restarts.size() == 16);
  CHECK(est.model.valid());
}

TEST_CASE("fit objective is zero at the true parameters") {
  CHECK(influence_fit_objective(reference_model(), reference_chain().G, std::vector<bool>(4, true)) < 1e-24);
}

TEST_CASE("a single site recovers the local matrix exactly") {
  Matrix G(3, 3);
  G << 0.2, 0.5, 0.3, 0.1, 0.1, 0.8, 0.6, 0.2, 0.2;
  const auto est = recover_influence_params(G, std::vector<bool>(3, true), ModelStructure::dense({3}, true));
  CHECK(max_abs(*est.model.shared_local(), G) == 0);
  CHECK(est.objective == 0);
}

TEST_CASE("identity chain pins the network to the identity") {
  // Every site keeps its own status only if it ignores the others, so the optimum is unique.
  const auto est = recover_influence_params(Matrix::Identity(4, 4), std::vector<bool>(4, true),
                                            ModelStructure::dense({2, 2}, true));
  CHECK(est.objective < 1e-12);
  CHECK(max_abs(*est.model.shared_local(), Matrix::Identity(2, 2)) < 1e-6);
  CHECK(max_abs(est.model.network(), Matrix::Identity(2, 2)) < 1e-6);
}

TEST_CASE("identical local rows leave the network unidentifiable") {
  Matrix A(2, 2);
  A << 0.3, 0.7, 0.3, 0.7;
  Matrix D(2, 2);
  D << 0.6, 0.4, 0.1, 0.9;
  const MasterChain chain = build_master_chain(InfluenceModel::homogeneous(D, A, {2, 2}));
  const auto est = recover_influence_params(chain.G, std::vector<bool>(4, true), ModelStructure::dense({2, 2}, true));
  CHECK(est.objective < 1e-12);
  CHECK(max_abs(*est.model.shared_local(), A) < 1e-6);
  CHECK(est.near_optimal > 1);
  CHECK(est.dispersion > 1e-4);
  CHECK_FALSE(est.unique_optimum);
}

TEST_CASE("heterogeneous structures with sparse support are recovered") {
  oracle::ModelFactory f(41);
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto model = f.random_model(16);
    if (model.sites() < 2) continue;
    const MasterChain chain = build_master_chain(model);
    const auto s = ModelStructure::of(model);
    const auto est = recover_influence_params(chain.G, std::vector<bool>(chain.size(), true), s);
    CHECK(est.objective < 1e-10);
    CHECK(max_abs(build_master_chain(est.model).G, chain.G) < 1e-5);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("only visited rows enter the fit") {
  Matrix G = reference_chain().G;
  G.row(3).setZero();
  std::vector<bool> visited{true, true, true, false};
  const auto est = recover_influence_params(G, visited, ModelStructure::dense({2, 2}, true));
  CHECK(est.objective < 1e-12);
  Matrix bad = G;
  bad(0, 0) = 0.5;
  CHECK_THROWS_AS(recover_influence_params(bad, visited, ModelStructure::dense({2, 2}, true)), ValidationError);
}

TEST_CASE("recovery reports an exhausted budget instead of failing") {
  RecoverConfig cfg;
  cfg.max_iters = 2;
  cfg.restarts = 2;
  const auto est = recover_influence_params(reference_chain().G, std::vector<bool>(4, true),
                                            ModelStructure::dense({2, 2}, true), cfg);
  CHECK_FALSE(est.converged);
  CHECK(est.model.valid());
}

// --- direct EM --------------------------------------------------------------------

TEST_CASE("single-site EM is counting on the local matrix") {
  Matrix A(3, 3);
  A << 0.2, 0.5, 0.3, 0.1, 0.1, 0.8, 0.6, 0.2, 0.2;
  const auto model = InfluenceModel::homogeneous(Matrix::Ones(1, 1), A, {3});
  const auto traj = sample_trajectory(model, 5000, JointState{0}, 3);
  const auto est = direct_em_full_obs(traj, ModelStructure::dense({3}, true));
  const auto counting = estimate_G_counting(traj);
  CHECK(max_abs(*est.model.shared_local(), counting.G_hat) < 1e-6);
}

TEST_CASE("direct EM on a long reference run") {
  const auto est = direct_em_full_obs(reference_run(), ModelStructure::dense({2, 2}, true));
  const auto truth = reference_model();
  CHECK(max_abs(est.model.network(), truth.network()) < 0.02);
  CHECK(max_abs(*est.model.shared_local(), *truth.shared_local()) < 0.02);
  CHECK(est.restarts.size() == 5);
  CHECK(largest_drop(est.trace) <= 1e-10);
  CHECK(est.trace.back() == doctest::Approx(full_obs_log_likelihood(est.model, reference_run())).epsilon(1e-10));
}

TEST_CASE("EM steps never lower the likelihood") {
  oracle::ModelFactory f(52);
  for (int trial = 0; trial < 8; ++trial) {
    const auto model = f.random_model(27);
    const MasterChain chain = build_master_chain(model);
    const auto traj = sample_trajectory(model, 3000, Vector::Constant(chain.size(), 1.0 / chain.size()), trial);
    EmConfig cfg;
    cfg.restarts = 3;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto est = direct_em_full_obs(traj, ModelStructure::of(model), cfg);
    CHECK(largest_drop(est.trace) <= 1e-10);
  }
}

TEST_CASE("an EM step from the truth does not lose likelihood") {
  const auto truth = reference_model();
  Trajectory shorter = reference_run();
  shorter.states.resize(20001);
  EmConfig cfg;
  cfg.max_iters = 1;
  const auto est = direct_em_full_obs_from(shorter, truth, cfg);
  CHECK(est.trace.back() - full_obs_log_likelihood(truth, shorter) >= -1e-10);
}

TEST_CASE("EM runs are reproducible for a fixed seed") {
  Trajectory shorter = reference_run();
  shorter.states.resize(5001);
  EmConfig cfg;
  cfg.seed = 17;
  const auto a = direct_em_full_obs(shorter, ModelStructure::dense({2, 2}, true), cfg);
  const auto b = direct_em_full_obs(shorter, ModelStructure::dense({2, 2}, true), cfg);
  CHECK(a.trace == b.trace);
  CHECK(max_abs(a.model.network(), b.model.network()) == 0);
}

TEST_CASE("EM rejects data that does not match the structure") {
  Trajectory shorter = reference_run();
  shorter.states.resize(11);
  CHECK_THROWS_AS(direct_em_full_obs(shorter, ModelStructure::dense({2, 3}, true)), ValidationError);
}

// --- forward likelihood and Baum-Welch ------------------------------------------

TEST_CASE("forward likelihood matches enumeration and the full-space recursion") {
  oracle::ModelFactory f(61);
  for (int trial = 0; trial < 15; ++trial) {
    const auto model = f.random_model(16);
    const MasterChain chain = build_master_chain(model);
    const Vector init = Vector::Constant(chain.size(), 1.0 / chain.size());
    const auto traj = sample_trajectory(model, 5, init, trial);
    std::vector<int> observed{0};
    const auto obs = project_observations(traj, observed);
    const double brute = oracle::brute_force_path_probability(chain.G, init, chain.m, observed, obs.values);
    CHECK(std::abs(forward_log_likelihood(obs, chain, init) - std::log(brute)) <= 1e-12);
    CHECK(std::abs(forward_log_likelihood(obs, chain, init) - observed_path_log_probability(chain, init, obs)) <= 1e-10);
  }
}

TEST_CASE("forward likelihood with every site observed") {
  const MasterChain& chain = reference_chain();
  const Vector pi = stationary_distribution(chain).pi;
  const ObservationSequence obs{{0, 1}, {{0, 0}, {0, 1}, {1, 1}}};
  const double expected = std::log(pi(0)) + std::log(chain.G(0, 1)) + std::log(chain.G(1, 3));
  CHECK(std::abs(forward_log_likelihood(obs, chain, pi) - expected) <= 1e-14);
}

TEST_CASE("likelihood ratios give the observed conditionals") {
  const MasterChain& chain = reference_chain();
  const Vector pi = stationary_distribution(chain).pi;
  const double ratio = std::exp(forward_log_likelihood({{0}, {{0}, {0}}}, chain, pi) -
                                forward_log_likelihood({{0}, {{0}}}, chain, pi));
  CHECK(std::abs(ratio - conditional_observed_probability(chain, pi, {{0}, {{0}}}, {0})) <= 1e-12);
  CHECK(std::abs(ratio - 0.8355) < 5e-4);
}

TEST_CASE("impossible sequences have log-likelihood minus infinity") {
  const MasterChain chain = build_master_chain(binary_copy_model(2));
  Vector init = Vector::Zero(4);
  init(0) = 1;
  const double ll = forward_log_likelihood({{0}, {{0}, {1}}}, chain, init);
  CHECK(std::isinf(ll));
  CHECK(ll < 0);
}

TEST_CASE("Baum-Welch with everything observed reduces to counting") {
  Trajectory shorter = reference_run();
  shorter.states.resize(20001);
  const auto obs = project_observations(shorter, {0, 1});
  const auto counting = estimate_G_counting(shorter);

  EmConfig one;
  one.max_iters = 1;
  const auto first = baum_welch_from(obs, {2, 2}, Matrix::Constant(4, 4, 0.25), Vector::Constant(4, 0.25), one);
  CHECK(max_abs(first.G_hat, counting.G_hat) < 1e-10);

  const auto full = baum_welch_poim(obs, {2, 2});
  CHECK(max_abs(full.G_hat, counting.G_hat) < 1e-10);
}

TEST_CASE("two-state chain with distinct emissions matches the closed form") {
  Matrix A(2, 2);
  A << 0.7, 0.3, 0.45, 0.55;
  const auto model = InfluenceModel::homogeneous(Matrix::Ones(1, 1), A, {2});
  const auto traj = sample_trajectory(model, 4000, JointState{1}, 8);
  const auto obs = project_observations(traj, {0});
  // Closed-form maximum likelihood: transition frequencies, start at the first state.
  Matrix counts = Matrix::Zero(2, 2);
  for (std::size_t k = 1; k < obs.values.size(); ++k) counts(obs.values[k - 1][0], obs.values[k][0]) += 1;
  Matrix mle = counts;
  for (int r = 0; r < 2; ++r) mle.row(r) /= counts.row(r).sum();
  const auto est = baum_welch_poim(obs, {2});
  CHECK(max_abs(est.G_hat, mle) < 1e-6);
  CHECK(est.init_hat(1) > 1 - 1e-6);
}

TEST_CASE("Baum-Welch traces are nondecreasing and the emission map is fixed") {
  Trajectory shorter = reference_run();
  shorter.states.resize(20001);
  const auto obs = project_observations(shorter, {0});
  EmConfig cfg;
  cfg.restarts = 4;
  cfg.max_iters = 200;
  const auto est = baum_welch_poim(obs, {2, 2}, cfg);
  for (const auto& r : est.restarts) CHECK(largest_drop(r.trace) <= 1e-10);
  CHECK(est.trace == est.restarts[est.best_restart].trace);
  for (const auto& r : est.restarts) CHECK(r.log_likelihood <= est.restarts[est.best_restart].log_likelihood);
  // Every state emits its own projection: the estimated chain is a valid
  // hidden chain whose likelihood under the fixed emission is the reported one.
  CHECK(std::abs(forward_log_likelihood(obs, MasterChain{est.G_hat, {2, 2}}, est.init_hat) - est.trace.back()) <=
        1e-6 * std::abs(est.trace.back()));
}

TEST_CASE("observationally equivalent hidden chains beyond relabeling") {
  // A similarity transform that mixes states sharing an observed status
  // leaves the likelihood unchanged, so the hidden chain is pinned down only
  // up to such transforms unless the influence structure is imposed.
  const MasterChain& chain = reference_chain();
  const Vector pi = stationary_distribution(chain).pi;
  Matrix T = Matrix::Identity(4, 4);
  T(0, 0) = 1.05;
  T(0, 1) = -0.05;
  const Matrix G2 = T.inverse() * chain.G * T;
  const Vector init2 = (pi.transpose() * T).transpose();
  REQUIRE(G2.minCoeff() >= 0);
  const MasterChain other{G2, {2, 2}};
  Trajectory shorter = reference_run();
  shorter.states.resize(5001);
  const auto obs = project_observations(shorter, {0});
  CHECK(std::abs(forward_log_likelihood(obs, chain, pi) - forward_log_likelihood(obs, other, init2)) < 1e-8);
  CHECK(permutation_match(G2, chain.G, {0}, {2, 2}).error > 0.02);
}

// --- permutation matching -------------------------------------------------------

TEST_CASE("identical chains match with the identity") {
  const auto rep = permutation_match(reference_chain().G, reference_chain().G, {0}, {2, 2});
  CHECK(rep.permutation == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(rep.error == 0);
  CHECK(rep.candidates == 4);
}

TEST_CASE("a swap of same-projection states is undone") {
  const std::vector<std::size_t> swap{1, 0, 2, 3};
  const Matrix G = relabel(reference_chain().G, swap);
  const auto rep = permutation_match(G, reference_chain().G, {0}, {2, 2});
  CHECK(rep.error == 0);
  CHECK(rep.permutation == swap);
  for (std::size_t a = 0; a < 4; ++a) CHECK(rep.permutation[a] / 2 == a / 2);
}

TEST_CASE("relabelings keep the observed projection") {
  const auto all = hidden_relabelings({2, 3, 2}, {1});
  CHECK(all.size() == 24 * 24 * 24);
  const StateCodec codec({2, 3, 2});
  for (const auto& p : all)
    for (std::size_t s = 0; s < p.size(); ++s) REQUIRE(codec.status(s, 1) == codec.status(p[s], 1));
  CHECK(all.front() == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
}

TEST_CASE("exhaustive matching refuses oversized searches") {
  const std::size_t N = 16;
  const Matrix G = Matrix::Constant(N, N, 1.0 / N);
  CHECK_THROWS_AS(permutation_match(G, G, {0}, {2, 2, 2, 2}, 1000), ComputationError);
  CHECK_THROWS_AS(permutation_match(G, G, {0}, {2, 2}), ValidationError);
}

TEST_CASE("two-stage identification on a short partially observed run") {
  Trajectory shorter = reference_run();
  shorter.states.resize(50001);
  const auto obs = project_observations(shorter, {0});
  EmConfig cfg;
  cfg.restarts = 3;
  cfg.max_iters = 200;
  const auto fit = identify_poim(obs, ModelStructure::dense({2, 2}, true), cfg);
  CHECK(fit.relabeling_searched);
  CHECK(fit.params.model.valid());
  CHECK(fit.relabeling.size() == 4);
  const auto rep = permutation_match(build_master_chain(fit.params.model).G, reference_chain().G, {0}, {2, 2});
  CHECK(rep.error < 0.2);
}
