#include "infmodel/reproduce.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace infmodel {

InfluenceModel reference_model() {
  Matrix D(2, 2);
  D << 0.6, 0.4, 0.3, 0.7;
  Matrix A(2, 2);
  A << 0.9, 0.1, 0.2, 0.8;
  return InfluenceModel::homogeneous(D, A, {2, 2});
}

InfluenceModel binary_copy_model(int n) {
  if (n < 1) throw ValidationError("binary copy model needs at least one site");
  return InfluenceModel::homogeneous(Matrix::Constant(n, n, 1.0 / n), Matrix::Identity(2, 2),
                                     std::vector<int>(n, 2));
}

bool ReproductionReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

io::Json ReproductionReport::to_json() const {
  io::Json out;
  out["all_pass"] = all_pass();
  io::Json arr = io::Json::array();
  for (const auto& c : checks) {
    io::Json j;
    j["id"] = c.id;
    j["claim"] = c.claim;
    j["pass"] = c.pass;
    j["observed"] = c.observed;
    j["expected"] = c.expected;
    j["tolerance"] = c.tolerance;
    j["detail"] = c.detail;
    arr.push_back(std::move(j));
  }
  out["checks"] = std::move(arr);
  out["details"] = details;
  return out;
}

io::Json default_reproduction_fixture() {
  return io::Json::parse(R"({
  "model": {
    "n": 2,
    "m": [2, 2],
    "D": [[0.6, 0.4], [0.3, 0.7]],
    "A_shared": [[0.9, 0.1], [0.2, 0.8]],
    "labels": ["1", "0"]
  },
  "expected_G": [[0.81, 0.09, 0.09, 0.01],
                 [0.2542, 0.3658, 0.1558, 0.2242],
                 [0.3312, 0.1488, 0.3588, 0.1612],
                 [0.04, 0.16, 0.16, 0.64]],
  "G_tolerance": 5e-5,
  "observed": [1],
  "conditionals": [
    {"id": "conditional_given_last", "history": [["1"]], "next": ["1"],
     "expected": 0.8355, "tolerance": 5e-5},
    {"id": "conditional_given_history", "history": [["0"], ["1"]], "next": ["1"],
     "expected": 0.7687, "tolerance": 5e-5}
  ],
  "gap": {"horizon": 2, "minimum": 0.0668, "slack": 1e-4},
  "binary_copy_sites": [2, 3, 4]
})");
}

namespace {

std::vector<int> tuple_from_labels(const io::Json& j, const std::vector<std::string>& labels) {
  std::vector<int> out;
  for (const auto& v : j) {
    const std::string label = v.get<std::string>();
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw ValidationError("fixture uses unknown label '" + label + "'");
    out.push_back(static_cast<int>(it - labels.begin()));
  }
  return out;
}

double conditional_for(const MasterChain& chain, const Vector& pi, const std::vector<int>& observed,
                       const io::Json& entry, const std::vector<std::string>& labels) {
  ObservationSequence history{observed, {}};
  for (const auto& step : entry["history"]) history.values.push_back(tuple_from_labels(step, labels));
  return conditional_observed_probability(chain, pi, history, tuple_from_labels(entry["next"], labels));
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

ReproductionReport reproduce(const io::Json& fixture) {
  ReproductionReport rep;
  const auto doc = io::model_from_json(fixture.at("model"));
  const MasterChain chain = build_master_chain(doc.model);
  const Matrix expected_G = io::matrix_from_json(fixture.at("expected_G"), "expected_G");
  const double g_tol = fixture.at("G_tolerance").get<double>();

  {
    ReproductionCheck c;
    c.id = "master_chain_entries";
    c.claim = "master chain transition matrix matches the printed G";
    if (expected_G.rows() != chain.G.rows() || expected_G.cols() != chain.G.cols()) {
      c.detail = "shape mismatch";
    } else {
      c.observed = (chain.G - expected_G).cwiseAbs().maxCoeff();
      c.tolerance = g_tol;
      c.pass = c.observed <= g_tol;
      c.detail = "max abs deviation over " + std::to_string(expected_G.size()) + " entries";
    }
    rep.checks.push_back(c);
  }

  const bool recurrent = single_recurrent_class(chain);
  rep.checks.push_back({"reference_chain_recurrent", "reference master chain has a single recurrent class",
                        recurrent, recurrent ? 1.0 : 0.0, 1.0, 0.0, ""});

  std::vector<int> observed;
  for (const auto& s : fixture.at("observed")) observed.push_back(s.get<int>() - 1);
  observed = normalize_observed(observed, doc.model.sites());
  const auto stat = stationary_distribution(chain);
  const Vector& pi = stat.pi;

  std::vector<std::string> labels = doc.labels;
  if (labels.empty())
    for (int k = 0; k < doc.model.status_counts()[0]; ++k) labels.push_back(std::to_string(k + 1));

  for (const auto& entry : fixture.at("conditionals")) {
    ReproductionCheck c;
    c.id = entry.at("id").get<std::string>();
    c.claim = "P(next | history) under the stationary start";
    c.expected = entry.at("expected").get<double>();
    c.tolerance = entry.at("tolerance").get<double>();
    c.observed = conditional_for(chain, pi, observed, entry, labels);
    c.pass = std::abs(c.observed - c.expected) <= c.tolerance;
    c.detail = "deviation " + format_double(std::abs(c.observed - c.expected));
    rep.checks.push_back(c);
  }

  const auto& gap_entry = fixture.at("gap");
  GapOptions opts;
  opts.horizon = gap_entry.at("horizon").get<int>();
  opts.keep_table = false;
  const auto gap = markovianity_gap(chain, pi, observed, opts);
  {
    const double minimum = gap_entry.at("minimum").get<double>();
    const double slack = gap_entry.at("slack").get<double>();
    rep.checks.push_back({"markovianity_gap", "observed process is not Markov (gap at horizon)",
                          gap.gap >= minimum - slack, gap.gap, minimum, slack,
                          "lower bound check: observed >= expected - tolerance"});
  }

  for (const auto& nj : fixture.at("binary_copy_sites")) {
    const int n = nj.get<int>();
    const MasterChain copy = build_master_chain(binary_copy_model(n));
    const auto dec = communicating_classes(copy);
    const StateCodec codec(copy.m);
    bool consensus = dec.absorbing_states.size() == 2;
    for (std::size_t s : dec.absorbing_states) {
      const JointState st = codec.state(s);
      consensus = consensus && std::adjacent_find(st.begin(), st.end(), std::not_equal_to<>()) == st.end();
    }
    const bool irreducible = single_recurrent_class(copy);
    ReproductionCheck c;
    c.id = "binary_copy_n" + std::to_string(n);
    c.claim = "binary copy model has exactly two absorbing consensus states and is not recurrent";
    c.pass = consensus && !irreducible;
    c.observed = static_cast<double>(dec.absorbing_states.size());
    c.expected = 2;
    c.detail = std::string("single recurrent class: ") + (irreducible ? "true" : "false");
    rep.checks.push_back(c);
  }

  // Every assignment of the published labels to status rows, for the record.
  io::Json conventions = io::Json::array();
  std::vector<std::string> perm = labels;
  std::sort(perm.begin(), perm.end());
  do {
    io::Json entry;
    entry["labels_by_status"] = perm;
    double distance = 0;
    io::Json values = io::Json::array();
    for (const auto& entry : fixture.at("conditionals")) {
      const double v = conditional_for(chain, pi, observed, entry, perm);
      values.push_back(v);
      distance = std::max(distance, std::abs(v - entry.at("expected").get<double>()));
    }
    entry["conditionals"] = std::move(values);
    entry["max_deviation"] = distance;
    entry["adopted"] = perm == labels;
    conventions.push_back(std::move(entry));
  } while (std::next_permutation(perm.begin(), perm.end()));

  rep.details["label_conventions"] = std::move(conventions);
  rep.details["stationary_distribution"] = io::vector_to_json(pi);
  rep.details["G"] = io::matrix_to_json(chain.G);
  rep.details["lumped_one_step_chain"] = io::matrix_to_json(lumped_one_step_chain(chain, pi, observed));
  return rep;
}

}  // namespace infmodel
