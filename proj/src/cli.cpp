#include "infmodel/cli.hpp"

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "infmodel/estimation.hpp"
#include "infmodel/io.hpp"
#include "infmodel/reproduce.hpp"

namespace infmodel::cli {

namespace {

using io::Json;

template <typename T>
void env_default(const char* name, T& value) {
  const char* raw = std::getenv(name);
  if (!raw || !*raw) return;
  try {
    const long long v = std::stoll(raw);
    if (v <= 0) throw std::invalid_argument("non-positive");
    value = static_cast<T>(v);
  } catch (const std::exception&) {
    throw ValidationError(std::string("environment variable ") + name + " must be a positive integer");
  }
}

std::vector<int> zero_based(const std::vector<int>& sites) {
  std::vector<int> out;
  for (int s : sites) out.push_back(s - 1);
  return out;
}

std::string status_name(int status, const std::vector<std::string>& labels) {
  return labels.empty() ? std::to_string(status + 1) : labels[static_cast<std::size_t>(status)];
}

std::string tuple_text(const std::vector<int>& tuple, const std::vector<std::string>& labels) {
  std::string s = "(";
  for (std::size_t k = 0; k < tuple.size(); ++k) {
    if (k) s += ",";
    s += status_name(tuple[k], labels);
  }
  return s + ")";
}

void print_matrix(std::ostream& out, const Matrix& M, int precision = 6) {
  out << std::fixed << std::setprecision(precision);
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    out << "  ";
    for (Eigen::Index c = 0; c < M.cols(); ++c) out << std::setw(precision + 4) << M(r, c);
    out << "\n";
  }
  out << std::defaultfloat;
}

Json classes_json(const ClassDecomposition& dec, const StateCodec& codec) {
  Json out;
  Json classes = Json::array();
  for (const auto& cls : dec.classes) {
    Json members = Json::array();
    for (std::size_t s : cls) members.push_back(io::state_to_json(codec.state(s)));
    classes.push_back(std::move(members));
  }
  out["classes"] = std::move(classes);
  out["recurrent"] = dec.recurrent;
  Json absorbing = Json::array();
  for (std::size_t s : dec.absorbing_states) absorbing.push_back(io::state_to_json(codec.state(s)));
  out["absorbing_states"] = std::move(absorbing);
  out["single_recurrent_class"] = dec.classes.size() == 1 && dec.recurrent[0];
  return out;
}

std::string class_listing(const ClassDecomposition& dec, const StateCodec& codec) {
  std::ostringstream os;
  for (std::size_t c = 0; c < dec.classes.size(); ++c) {
    os << "  class " << c + 1 << (dec.recurrent[c] ? " (recurrent):" : " (transient):");
    for (std::size_t s : dec.classes[c]) os << " " << tuple_text(codec.state(s), {});
    os << "\n";
  }
  return os.str();
}

void require_out(const RunConfig& cfg) {
  if (cfg.out_path.empty()) throw ValidationError("--out is required");
}

Vector initial_distribution(const RunConfig& cfg, const MasterChain& chain, Json& echo) {
  if (cfg.init == "stationary") {
    std::optional<std::size_t> cls;
    if (cfg.class_id) {
      if (*cfg.class_id < 1) throw ValidationError("--class is 1-based");
      cls = *cfg.class_id - 1;
    }
    try {
      const auto st = stationary_distribution(chain, cls);
      echo["init"] = "stationary";
      echo["class"] = st.class_id + 1;
      return st.pi;
    } catch (const ComputationError& e) {
      const auto dec = communicating_classes(chain);
      throw ComputationError(std::string(e.what()) + "\n" + class_listing(dec, chain.codec()) +
                             "pass --class or an explicit --init state");
    }
  }
  std::vector<int> tuple;
  std::stringstream ss(cfg.init);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      tuple.push_back(std::stoi(tok) - 1);
    } catch (const std::exception&) {
      throw ValidationError("--init must be 'stationary' or a comma-separated state");
    }
  }
  require_state(tuple, chain.m);
  Vector init = Vector::Zero(chain.G.rows());
  init(chain.codec().index(tuple)) = 1.0;
  echo["init"] = io::state_to_json(tuple);
  return init;
}

// --- build -----------------------------------------------------------------

int cmd_build(const RunConfig& cfg, std::ostream& out) {
  require_out(cfg);
  const auto doc = io::model_from_json(io::read_json_file(cfg.model_path));
  const MasterChain chain = build_master_chain(doc.model, cfg.max_states);
  const auto dec = communicating_classes(chain);
  const StateCodec codec = chain.codec();

  Json report;
  report["model_fingerprint"] = io::fingerprint_hex(model_fingerprint(doc.model));
  report["states"] = codec.size();
  report["G"] = io::matrix_to_json(chain.G);
  report["class_decomposition"] = classes_json(dec, codec);

  std::filesystem::path report_path = cfg.report_path;
  if (report_path.empty()) report_path = std::filesystem::path(cfg.out_path).replace_extension(".report.json");
  const std::string chain_text = io::dump(io::chain_to_json(chain, doc.labels));
  const std::string report_text = io::dump(report);
  io::write_text_file(cfg.out_path, chain_text);
  io::write_text_file(report_path, report_text);

  out << "master chain: " << codec.size() << " joint states\n";
  if (codec.size() <= 64) print_matrix(out, chain.G, 4);
  out << "communicating classes: " << dec.classes.size() << "\n" << class_listing(dec, codec);
  out << "absorbing states:";
  for (std::size_t s : dec.absorbing_states) out << " " << tuple_text(codec.state(s), doc.labels);
  out << "\nsingle recurrent class: " << (dec.classes.size() == 1 && dec.recurrent[0] ? "true" : "false")
      << "\n";
  return kOk;
}

// --- analyze ---------------------------------------------------------------

int cmd_analyze(const RunConfig& cfg, std::ostream& out) {
  std::vector<std::string> labels;
  const MasterChain chain = io::chain_from_json(io::read_json_file(cfg.chain_path), &labels);
  if (cfg.observed.empty()) throw ValidationError("--observed is required");
  const std::vector<int> observed = normalize_observed(zero_based(cfg.observed), static_cast<int>(chain.m.size()));
  if (cfg.horizon < 2) throw ValidationError("--horizon must be at least 2");

  Json report;
  report["observed"] = cfg.observed;
  report["horizon"] = cfg.horizon;
  Json echo;
  const Vector init = initial_distribution(cfg, chain, echo);
  report["init"] = echo;
  report["initial_distribution"] = io::vector_to_json(init);

  const ObservedProjection proj(chain.m, observed);
  GapOptions opts;
  opts.horizon = cfg.horizon;
  opts.horizon_cap = cfg.max_horizon;
  const auto gap = markovianity_gap(chain, init, observed, opts);

  Json lumped;
  try {
    lumped = io::matrix_to_json(lumped_one_step_chain(chain, init, observed));
  } catch (const ComputationError& e) {
    lumped = e.what();
  }
  report["lumped_one_step_chain"] = lumped;

  Json table = Json::array();
  for (const auto& row : gap.table) {
    Json r;
    Json hist = Json::array();
    for (std::size_t a : row.history) hist.push_back(io::state_to_json(proj.decode(a)));
    r["history"] = std::move(hist);
    r["next"] = io::state_to_json(proj.decode(row.next));
    r["given_last"] = row.given_last;
    r["given_history"] = row.given_history;
    table.push_back(std::move(r));
  }
  report["conditionals"] = std::move(table);
  report["markovianity_gap"] = gap.gap;
  if (!gap.worst_history.empty()) {
    Json hist = Json::array();
    for (std::size_t a : gap.worst_history) hist.push_back(io::state_to_json(proj.decode(a)));
    report["gap_history"] = std::move(hist);
    report["gap_next"] = io::state_to_json(proj.decode(gap.worst_next));
  }

  if (!cfg.out_path.empty()) io::write_text_file(cfg.out_path, io::dump(report));

  out << "initial distribution:";
  for (Eigen::Index k = 0; k < init.size(); ++k) out << " " << init(k);
  out << "\n";
  if (lumped.is_array()) {
    out << "lumped one-step chain over observed statuses:\n";
    print_matrix(out, lumped_one_step_chain(chain, init, observed), 4);
  }
  out << "conditionals (history -> next): P(next | last)  P(next | history)\n";
  constexpr std::size_t kMaxRows = 64;
  for (std::size_t k = 0; k < gap.table.size() && k < kMaxRows; ++k) {
    const auto& row = gap.table[k];
    out << "  ";
    for (std::size_t a : row.history) out << tuple_text(proj.decode(a), labels);
    out << " -> " << tuple_text(proj.decode(row.next), labels) << std::fixed << std::setprecision(6)
        << "  " << row.given_last << "  " << row.given_history << std::defaultfloat << "\n";
  }
  if (gap.table.size() > kMaxRows) out << "  ... " << gap.table.size() - kMaxRows << " more rows in the report\n";
  out << "markovianity gap (horizon " << cfg.horizon << "): " << std::setprecision(10) << gap.gap
      << std::defaultfloat << "\n";
  return kOk;
}

// --- simulate --------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  require_out(cfg);
  const auto doc = io::model_from_json(io::read_json_file(cfg.model_path));
  InitialCondition init;
  if (cfg.init == "stationary") {
    const MasterChain chain = build_master_chain(doc.model, cfg.max_states);
    Json echo;
    init = initial_distribution(cfg, chain, echo);
  } else {
    std::vector<int> tuple;
    std::stringstream ss(cfg.init);
    for (std::string tok; std::getline(ss, tok, ',');) {
      try {
        tuple.push_back(std::stoi(tok) - 1);
      } catch (const std::exception&) {
        throw ValidationError("--init must be 'stationary' or a comma-separated state");
      }
    }
    require_state(tuple, doc.model.status_counts());
    init = tuple;
  }
  const Trajectory traj = sample_trajectory(doc.model, cfg.T, init, cfg.seed);

  std::string obs_text;
  if (!cfg.observed.empty()) {
    const auto obs = project_observations(traj, zero_based(cfg.observed));
    obs_text = io::dump(io::observations_to_json(obs, traj.m, traj.fingerprint, traj.seed));
  } else if (!cfg.obs_out_path.empty()) {
    throw ValidationError("--obs-out requires --observed");
  }
  io::write_text_file(cfg.out_path, io::dump(io::trajectory_to_json(traj)));
  if (!obs_text.empty()) {
    if (cfg.obs_out_path.empty()) throw ValidationError("--observed requires --obs-out");
    io::write_text_file(cfg.obs_out_path, obs_text);
  }
  out << "sampled " << traj.steps() << " steps (seed " << traj.seed << ", model "
      << io::fingerprint_hex(traj.fingerprint) << ")\n";
  return kOk;
}

// --- estimate --------------------------------------------------------------

Json config_echo(const RunConfig& cfg, int restarts) {
  Json c;
  c["seed"] = cfg.seed;
  c["restarts"] = restarts;
  c["max_iters"] = cfg.max_iters;
  c["tol"] = cfg.tol;
  c["smoothing"] = cfg.smoothing;
  return c;
}

Json restarts_json(const std::vector<RestartSummary>& rs) {
  Json arr = Json::array();
  for (const auto& r : rs) {
    Json j;
    j["index"] = r.index;
    j["objective"] = r.objective;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    arr.push_back(std::move(j));
  }
  return arr;
}

Json params_json(const InfluenceParamEstimate& est) {
  Json j;
  j["model"] = io::model_to_json(est.model);
  j["objective"] = est.objective;
  j["iterations"] = est.iterations;
  j["converged"] = est.converged;
  j["best_restart"] = est.best_restart;
  j["restarts"] = restarts_json(est.restarts);
  j["dispersion"] = est.dispersion;
  j["near_optimal_restarts"] = est.near_optimal;
  j["unique_optimum"] = est.unique_optimum;
  return j;
}

Json visited_json(const std::vector<bool>& visited, const StateCodec& codec) {
  Json arr = Json::array();
  for (std::size_t s = 0; s < visited.size(); ++s) {
    Json j;
    j["state"] = io::state_to_json(codec.state(s));
    j["visited"] = static_cast<bool>(visited[s]);
    arr.push_back(std::move(j));
  }
  return arr;
}

Json estimate_rows_json(const Matrix& G, const std::vector<bool>& visited) {
  Json arr = Json::array();
  for (Eigen::Index r = 0; r < G.rows(); ++r) {
    if (!visited[r]) {
      arr.push_back(nullptr);
      continue;
    }
    Json row = Json::array();
    for (Eigen::Index c = 0; c < G.cols(); ++c) row.push_back(G(r, c));
    arr.push_back(std::move(row));
  }
  return arr;
}

std::optional<InfluenceModel> truth_if_full(const std::string& path) {
  if (path.empty()) return std::nullopt;
  const Json j = io::read_json_file(path);
  if (!j.is_object() || !j.contains("D")) return std::nullopt;
  return io::model_from_json(j).model;
}

ModelStructure structure_from(const RunConfig& cfg) {
  if (cfg.model_path.empty()) throw ValidationError("--model (structure or model file) is required");
  return io::structure_from_json(io::read_json_file(cfg.model_path));
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out) {
  require_out(cfg);
  const std::string& e = cfg.estimator;
  if (cfg.max_iters < 1) throw ValidationError("--max-iters must be positive");
  if (!(cfg.tol > 0)) throw ValidationError("--tol must be positive");
  if (cfg.restarts < 0 || cfg.restarts > cfg.max_restarts)
    throw ValidationError("--restarts must be between 1 and " + std::to_string(cfg.max_restarts));

  Json report;
  report["estimator"] = e;

  if (e == "counting") {
    if (cfg.data_path.empty()) throw ValidationError("--data (trajectory) is required");
    const Trajectory traj = io::trajectory_from_json(io::read_json_file(cfg.data_path));
    const auto truth = truth_if_full(cfg.model_path);
    std::optional<MasterChain> chain;
    if (truth) chain = build_master_chain(*truth, cfg.max_states);
    const auto est = estimate_G_counting(traj, chain ? &*chain : nullptr);
    const StateCodec codec(traj.m);
    report["config"] = config_echo(cfg, 0);
    report["data_seed"] = traj.seed;
    report["transitions"] = traj.steps();
    report["G_hat"] = estimate_rows_json(est.G_hat, est.visited);
    report["counts"] = io::matrix_to_json(est.counts);
    Json diag;
    diag["visited"] = visited_json(est.visited, codec);
    diag["unvisited_rows"] = std::count(est.visited.begin(), est.visited.end(), false);
    diag["recurrence_ok"] = est.recurrence_ok;
    diag["recurrence_source"] = est.recurrence_empirical ? "empirical support" : "true chain";
    if (chain) {
      double err = 0;
      for (std::size_t s = 0; s < est.visited.size(); ++s)
        if (est.visited[s]) err = std::max(err, (est.G_hat.row(s) - chain->G.row(s)).cwiseAbs().maxCoeff());
      diag["max_error_visited_rows"] = err;
    }
    report["diagnostics"] = diag;
    io::write_text_file(cfg.out_path, io::dump(report));
    out << "counting estimate over " << traj.steps() << " transitions; unvisited rows: "
        << diag["unvisited_rows"].get<long>() << "; recurrence "
        << (est.recurrence_ok ? "ok" : "NOT established") << "\n";
    if (codec.size() <= 64) print_matrix(out, est.G_hat, 4);
    return kOk;
  }

  if (e == "recover") {
    const ModelStructure structure = structure_from(cfg);
    Matrix G_hat;
    std::vector<bool> visited;
    if (!cfg.chain_path.empty()) {
      const MasterChain chain = io::chain_from_json(io::read_json_file(cfg.chain_path));
      G_hat = chain.G;
      visited.assign(chain.size(), true);
    } else if (!cfg.data_path.empty()) {
      const auto est = estimate_G_counting(io::trajectory_from_json(io::read_json_file(cfg.data_path)));
      G_hat = est.G_hat;
      visited = est.visited;
    } else {
      throw ValidationError("--chain or --data is required for recover");
    }
    RecoverConfig rc;
    rc.restarts = cfg.restarts ? cfg.restarts : rc.restarts;
    rc.seed = cfg.seed;
    const auto est = recover_influence_params(G_hat, visited, structure, rc);
    Json c;
    c["seed"] = rc.seed;
    c["restarts"] = rc.restarts;
    c["max_iters"] = rc.max_iters;
    c["tol"] = rc.tol;
    report["config"] = c;
    report["estimate"] = params_json(est);
    io::write_text_file(cfg.out_path, io::dump(report));
    out << "recovered influence parameters: objective " << std::scientific << est.objective
        << std::defaultfloat << ", dispersion " << est.dispersion << " ("
        << (est.unique_optimum ? "unique optimum" : "NON-UNIQUE optimum") << ")\nD:\n";
    print_matrix(out, est.model.network());
    if (est.model.shared_local()) {
      out << "A:\n";
      print_matrix(out, *est.model.shared_local());
    }
    return est.converged ? kOk : kRuntimeFailure;
  }

  EmConfig em;
  em.seed = cfg.seed;
  em.max_iters = cfg.max_iters;
  em.tol = cfg.tol;
  em.smoothing = cfg.smoothing;

  if (e == "em-full") {
    if (cfg.data_path.empty()) throw ValidationError("--data (trajectory) is required");
    const ModelStructure structure = structure_from(cfg);
    const Trajectory traj = io::trajectory_from_json(io::read_json_file(cfg.data_path));
    em.restarts = cfg.restarts ? cfg.restarts : 5;
    const auto est = direct_em_full_obs(traj, structure, em);
    report["config"] = config_echo(cfg, em.restarts);
    report["likelihood_trace"] = est.trace;
    report["estimate"] = params_json(est);
    io::write_text_file(cfg.out_path, io::dump(report));
    out << "direct EM: log-likelihood " << std::setprecision(12) << est.objective << std::defaultfloat
        << " after " << est.iterations << " iterations\nD:\n";
    print_matrix(out, est.model.network());
    return kOk;
  }

  if (e == "baum-welch") {
    if (cfg.data_path.empty()) throw ValidationError("--data (observations or trajectory) is required");
    const ModelStructure structure = structure_from(cfg);
    const Json data = io::read_json_file(cfg.data_path);
    std::vector<int> m;
    ObservationSequence obs;
    if (data.is_object() && data.value("kind", "") == "trajectory") {
      if (cfg.observed.empty()) throw ValidationError("--observed is required with a trajectory");
      const Trajectory traj = io::trajectory_from_json(data);
      obs = project_observations(traj, zero_based(cfg.observed));
      m = traj.m;
    } else {
      obs = io::observations_from_json(data, &m);
    }
    if (m != structure.m) throw ValidationError("data does not match the structure");
    if (StateCodec(m).size() > cfg.max_states) throw ComputationError("hidden state space exceeds the cap");
    em.restarts = cfg.restarts ? cfg.restarts : 10;
    const auto fit = identify_poim(obs, structure, em);
    const auto& hmm = fit.hmm;

    report["config"] = config_echo(cfg, em.restarts);
    Json sites = Json::array();
    for (int s : hmm.observed) sites.push_back(s + 1);
    report["observed"] = std::move(sites);
    report["likelihood_trace"] = hmm.trace;
    report["G_hat"] = io::matrix_to_json(hmm.G_hat);
    report["init_hat"] = io::vector_to_json(hmm.init_hat);
    Json rs = Json::array();
    for (const auto& r : hmm.restarts) {
      Json j;
      j["index"] = r.index;
      j["log_likelihood"] = r.degenerate ? Json(nullptr) : Json(r.log_likelihood);
      j["iterations"] = r.iterations;
      j["converged"] = r.converged;
      j["degenerate"] = r.degenerate;
      rs.push_back(std::move(j));
    }
    report["restarts"] = std::move(rs);
    report["best_restart"] = hmm.best_restart;
    Json constrained = params_json(fit.params);
    Json relabel = Json::array();
    for (std::size_t s : fit.relabeling) relabel.push_back(s + 1);
    constrained["relabeling"] = std::move(relabel);
    constrained["relabeling_searched"] = fit.relabeling_searched;
    report["constrained_fit"] = std::move(constrained);

    if (const auto truth = truth_if_full(cfg.model_path)) {
      const MasterChain chain = build_master_chain(*truth, cfg.max_states);
      const auto match = permutation_match(hmm.G_hat, chain.G, hmm.observed, m);
      Json pm;
      Json perm = Json::array();
      for (std::size_t s : match.permutation) perm.push_back(s + 1);
      pm["permutation"] = std::move(perm);
      pm["error"] = match.error;
      pm["residuals"] = io::matrix_to_json(match.residuals);
      report["permutation_match"] = std::move(pm);
      out << "permutation-matched max error vs true chain: " << match.error << "\n";
    }
    io::write_text_file(cfg.out_path, io::dump(report));
    out << "Baum-Welch: best restart " << hmm.best_restart + 1 << " of " << hmm.restarts.size()
        << ", log-likelihood " << std::setprecision(12) << hmm.restarts[hmm.best_restart].log_likelihood
        << std::defaultfloat << "\n";
    if (hmm.G_hat.rows() <= 64) print_matrix(out, hmm.G_hat, 4);
    return kOk;
  }

  throw ValidationError("unknown estimator '" + e + "' (counting|recover|em-full|baum-welch)");
}

// --- reproduce -------------------------------------------------------------

int cmd_reproduce(const RunConfig& cfg, std::ostream& out) {
  const Json fixture = cfg.fixture_path.empty() ? default_reproduction_fixture()
                                                : io::read_json_file(cfg.fixture_path);
  ReproductionReport rep;
  try {
    rep = reproduce(fixture);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed fixture: ") + e.what());
  }
  const std::string text = io::dump(rep.to_json());
  if (!cfg.out_path.empty()) io::write_text_file(cfg.out_path, text);
  for (const auto& c : rep.checks) {
    out << (c.pass ? "PASS " : "FAIL ") << std::left << std::setw(28) << c.id << std::right
        << " observed " << std::setprecision(10) << c.observed << "  expected " << c.expected
        << "  tol " << c.tolerance << std::defaultfloat;
    if (!c.detail.empty()) out << "  (" << c.detail << ")";
    out << "\n";
  }
  out << (rep.all_pass() ? "all reproduction checks passed\n" : "some reproduction checks failed\n");
  return rep.all_pass() ? kOk : kRuntimeFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    env_default("INFMODEL_MAX_STATES", cfg.max_states);
    env_default("INFMODEL_MAX_HORIZON", cfg.max_horizon);
    env_default("INFMODEL_MAX_RESTARTS", cfg.max_restarts);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  }

  CLI::App app{"Influence model toolkit: master chains, partial observation, identification"};
  app.require_subcommand(1);
  std::size_t class_id = 0;

  auto add_caps = [&](CLI::App* sub) {
    sub->add_option("--max-states", cfg.max_states, "joint state space cap");
    sub->add_option("--max-horizon", cfg.max_horizon, "history length cap");
    sub->add_option("--max-restarts", cfg.max_restarts, "restart count cap");
  };

  auto* build = app.add_subcommand("build", "build the master chain and classify its states");
  build->add_option("--model", cfg.model_path, "model file")->required();
  build->add_option("--out", cfg.out_path, "chain file to write");
  build->add_option("--report", cfg.report_path, "analysis report (default: <out>.report.json)");
  add_caps(build);

  auto* analyze = app.add_subcommand("analyze", "analyze the observed projection of a chain");
  analyze->add_option("--chain", cfg.chain_path, "chain file")->required();
  analyze->add_option("--observed", cfg.observed, "observed sites (comma list, 1-based)")->delimiter(',');
  analyze->add_option("--horizon", cfg.horizon, "longest conditioning history");
  analyze->add_option("--init", cfg.init, "'stationary' or a joint state such as 1,2");
  auto* class_opt = analyze->add_option("--class", class_id, "recurrent class for the stationary start");
  analyze->add_option("--out", cfg.out_path, "report file");
  add_caps(analyze);

  auto* simulate = app.add_subcommand("simulate", "sample a trajectory");
  simulate->add_option("--model", cfg.model_path, "model file")->required();
  simulate->add_option("--T", cfg.T, "number of steps")->required();
  simulate->add_option("--seed", cfg.seed, "random seed");
  simulate->add_option("--init", cfg.init, "'stationary' or a joint state such as 1,2");
  simulate->add_option("--observed", cfg.observed, "observed sites for --obs-out")->delimiter(',');
  simulate->add_option("--out", cfg.out_path, "trajectory file");
  simulate->add_option("--obs-out", cfg.obs_out_path, "observation file");
  add_caps(simulate);

  auto* estimate = app.add_subcommand("estimate", "run an estimator");
  estimate->add_option("--estimator", cfg.estimator, "counting|recover|em-full|baum-welch")->required();
  estimate->add_option("--data", cfg.data_path, "trajectory or observation file");
  estimate->add_option("--chain", cfg.chain_path, "chain file (recover)");
  estimate->add_option("--model", cfg.model_path, "structure or model file");
  estimate->add_option("--observed", cfg.observed, "observed sites when --data is a trajectory")->delimiter(',');
  estimate->add_option("--seed", cfg.seed, "random seed");
  estimate->add_option("--restarts", cfg.restarts, "number of restarts");
  estimate->add_option("--max-iters", cfg.max_iters, "iteration cap");
  estimate->add_option("--tol", cfg.tol, "relative convergence tolerance");
  estimate->add_option("--smoothing", cfg.smoothing, "M-step smoothing");
  estimate->add_option("--out", cfg.out_path, "report file");
  add_caps(estimate);

  auto* repro = app.add_subcommand("reproduce", "recompute the published counterexample numbers");
  repro->add_option("--fixture", cfg.fixture_path, "fixture file (default: bundled)");
  repro->add_option("--out", cfg.out_path, "report file");

  std::vector<std::string> argv_store;
  argv_store.push_back("infmodel");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  }
  if (class_opt->count()) cfg.class_id = class_id;

  try {
    if (build->parsed()) return cmd_build(cfg, out);
    if (analyze->parsed()) return cmd_analyze(cfg, out);
    if (simulate->parsed()) return cmd_simulate(cfg, out);
    if (estimate->parsed()) return cmd_estimate(cfg, out);
    if (repro->parsed()) return cmd_reproduce(cfg, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kInvalidInput;
}

}  // namespace infmodel::cli
