#include "infmodel/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace infmodel::io {

namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed,
                    const std::string& what) {
  if (!j.is_object()) throw ValidationError(what + " must be a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!keys.count(key)) throw ValidationError(what + " has unknown field '" + key + "'");
  }
}

const Json& field(const Json& j, const char* key, const std::string& what) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(what + " is missing field '" + key + "'");
  return *it;
}

int integer(const Json& j, const std::string& what) {
  if (!j.is_number_integer()) throw ValidationError(what + " must be an integer");
  return j.get<int>();
}

std::vector<int> int_list(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array");
  std::vector<int> out;
  for (const auto& v : j) out.push_back(integer(v, what));
  return out;
}

std::vector<std::string> string_list(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw ValidationError(what + " must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::vector<int> sites_from_json(const Json& j, int n, const std::string& what) {
  std::vector<int> sites = int_list(j, what);
  for (int& s : sites) {
    if (s < 1 || s > n) throw ValidationError(what + " has site " + std::to_string(s) + " out of range");
    --s;
  }
  if (!std::is_sorted(sites.begin(), sites.end()))
    throw ValidationError(what + " must be listed in increasing order");
  return normalize_observed(sites, n);
}

Json sites_to_json(const std::vector<int>& sites) {
  Json out = Json::array();
  for (int s : sites) out.push_back(s + 1);
  return out;
}

void check_labels(const std::vector<std::string>& labels, const std::vector<int>& m) {
  if (labels.empty()) return;
  for (int mi : m)
    if (mi != static_cast<int>(labels.size()))
      throw ValidationError("labels need one entry per status and equal status counts");
}

}  // namespace

Json matrix_to_json(const Matrix& M) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ValidationError(what + " must be a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) throw ValidationError(what + " rows must be non-empty arrays");
  const std::size_t cols = j[0].size();
  Matrix M(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ValidationError(what + " is not rectangular");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ValidationError(what + " has a non-numeric entry");
      M(r, c) = j[r][c].get<double>();
    }
  }
  return M;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array");
  Vector v(j.size());
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw ValidationError(what + " has a non-numeric entry");
    v(k) = j[k].get<double>();
  }
  return v;
}

Json model_to_json(const InfluenceModel& model, const std::vector<std::string>& labels) {
  Json out;
  out["n"] = model.sites();
  out["m"] = model.status_counts();
  out["D"] = matrix_to_json(model.network());
  if (model.shared_local()) {
    out["A_shared"] = matrix_to_json(*model.shared_local());
  } else {
    Json pairs = Json::array();
    for (const auto& [key, A] : model.pair_locals()) {
      Json rec;
      rec["from"] = key.first + 1;
      rec["to"] = key.second + 1;
      rec["matrix"] = matrix_to_json(A);
      pairs.push_back(std::move(rec));
    }
    out["A"] = std::move(pairs);
  }
  if (!labels.empty()) out["labels"] = labels;
  return out;
}

ModelDocument model_from_json(const Json& j) {
  reject_unknown(j, {"n", "m", "D", "A_shared", "A", "labels"}, "model");
  const int n = integer(field(j, "n", "model"), "model field 'n'");
  if (n < 1) throw ValidationError("model field 'n' must be positive");
  std::vector<int> m = int_list(field(j, "m", "model"), "model field 'm'");
  if (static_cast<int>(m.size()) != n) throw ValidationError("model field 'm' must have n entries");
  Matrix D = matrix_from_json(field(j, "D", "model"), "D");

  const bool has_shared = j.contains("A_shared");
  const bool has_pairs = j.contains("A");
  if (has_shared == has_pairs)
    throw ValidationError("model needs exactly one of 'A_shared' and 'A'");

  std::vector<std::string> labels;
  if (j.contains("labels")) {
    labels = string_list(j["labels"], "labels");
    check_labels(labels, m);
  }

  if (has_shared) {
    InfluenceModel model =
        InfluenceModel::homogeneous(std::move(D), matrix_from_json(j["A_shared"], "A_shared"), m);
    model.require_valid();
    return {std::move(model), std::move(labels)};
  }
  if (!j["A"].is_array()) throw ValidationError("model field 'A' must be an array");
  std::map<InfluenceModel::PairKey, Matrix> locals;
  for (const auto& rec : j["A"]) {
    reject_unknown(rec, {"from", "to", "matrix"}, "local matrix record");
    const int from = integer(field(rec, "from", "local matrix record"), "'from'") - 1;
    const int to = integer(field(rec, "to", "local matrix record"), "'to'") - 1;
    if (from < 0 || from >= n || to < 0 || to >= n)
      throw ValidationError("local matrix record refers to a missing site");
    if (!locals.emplace(std::make_pair(from, to), matrix_from_json(rec["matrix"], "matrix")).second)
      throw ValidationError("duplicate local matrix record");
  }
  InfluenceModel model = InfluenceModel::heterogeneous(std::move(D), std::move(locals), m);
  model.require_valid();
  return {std::move(model), std::move(labels)};
}

Json chain_to_json(const MasterChain& chain, const std::vector<std::string>& labels) {
  Json out;
  out["codec"] = kCodecName;
  out["m"] = chain.m;
  out["G"] = matrix_to_json(chain.G);
  if (!labels.empty()) out["labels"] = labels;
  return out;
}

MasterChain chain_from_json(const Json& j, std::vector<std::string>* labels) {
  reject_unknown(j, {"codec", "m", "G", "labels"}, "chain");
  if (field(j, "codec", "chain") != kCodecName)
    throw ValidationError(std::string("chain codec must be '") + kCodecName + "'");
  MasterChain chain{matrix_from_json(field(j, "G", "chain"), "G"),
                    int_list(field(j, "m", "chain"), "chain field 'm'")};
  require_chain(chain, kStochasticTolerance);
  if (j.contains("labels")) {
    auto l = string_list(j["labels"], "labels");
    check_labels(l, chain.m);
    if (labels) *labels = std::move(l);
  }
  return chain;
}

Json state_to_json(const JointState& s) {
  Json out = Json::array();
  for (int v : s) out.push_back(v + 1);
  return out;
}

JointState state_from_json(const Json& j, const std::vector<int>& m) {
  JointState s = int_list(j, "state");
  for (int& v : s) --v;
  require_state(s, m);
  return s;
}

std::string fingerprint_hex(std::uint64_t fp) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fp;
  return os.str();
}

std::uint64_t fingerprint_from_hex(const std::string& s) {
  if (s.empty() || s.size() > 16 || s.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
    throw ValidationError("model fingerprint must be a hexadecimal string");
  return std::stoull(s, nullptr, 16);
}

Json trajectory_to_json(const Trajectory& traj) {
  const StateCodec codec(traj.m);
  Json out;
  out["kind"] = "trajectory";
  out["model_fingerprint"] = fingerprint_hex(traj.fingerprint);
  out["seed"] = traj.seed;
  out["m"] = traj.m;
  Json states = Json::array();
  for (std::size_t s : traj.states) states.push_back(state_to_json(codec.state(s)));
  out["states"] = std::move(states);
  return out;
}

Trajectory trajectory_from_json(const Json& j) {
  reject_unknown(j, {"kind", "model_fingerprint", "seed", "m", "states"}, "trajectory");
  if (field(j, "kind", "trajectory") != "trajectory")
    throw ValidationError("document is not a trajectory");
  Trajectory traj;
  traj.m = int_list(field(j, "m", "trajectory"), "trajectory field 'm'");
  const StateCodec codec(traj.m);
  traj.fingerprint = fingerprint_from_hex(field(j, "model_fingerprint", "trajectory").get<std::string>());
  const Json& seed = field(j, "seed", "trajectory");
  if (!seed.is_number_unsigned() && !seed.is_number_integer())
    throw ValidationError("trajectory seed must be an integer");
  traj.seed = seed.get<std::uint64_t>();
  const Json& states = field(j, "states", "trajectory");
  if (!states.is_array() || states.empty()) throw ValidationError("trajectory has no states");
  for (const auto& s : states) traj.states.push_back(codec.index(state_from_json(s, traj.m)));
  return traj;
}

Json observations_to_json(const ObservationSequence& obs, const std::vector<int>& m,
                          std::uint64_t fingerprint, std::uint64_t seed) {
  Json out;
  out["kind"] = "observations";
  out["model_fingerprint"] = fingerprint_hex(fingerprint);
  out["seed"] = seed;
  out["m"] = m;
  out["observed"] = sites_to_json(obs.observed);
  Json values = Json::array();
  for (const auto& tuple : obs.values) values.push_back(state_to_json(tuple));
  out["values"] = std::move(values);
  return out;
}

ObservationSequence observations_from_json(const Json& j, std::vector<int>* m_out) {
  reject_unknown(j, {"kind", "model_fingerprint", "seed", "m", "observed", "values"}, "observations");
  if (field(j, "kind", "observations") != "observations")
    throw ValidationError("document is not an observation sequence");
  const std::vector<int> m = int_list(field(j, "m", "observations"), "observations field 'm'");
  ObservationSequence obs;
  obs.observed = sites_from_json(field(j, "observed", "observations"), static_cast<int>(m.size()),
                                 "observed sites");
  std::vector<int> sub_m;
  for (int s : obs.observed) sub_m.push_back(m[s]);
  const Json& values = field(j, "values", "observations");
  if (!values.is_array() || values.empty()) throw ValidationError("observation sequence is empty");
  for (const auto& v : values) obs.values.push_back(state_from_json(v, sub_m));
  if (m_out) *m_out = m;
  return obs;
}

ModelStructure structure_from_json(const Json& j) {
  if (j.is_object() && j.contains("D")) return ModelStructure::of(model_from_json(j).model);
  reject_unknown(j, {"n", "m", "shared_local", "network_support"}, "structure");
  const int n = integer(field(j, "n", "structure"), "structure field 'n'");
  std::vector<int> m = int_list(field(j, "m", "structure"), "structure field 'm'");
  if (n < 1 || static_cast<int>(m.size()) != n)
    throw ValidationError("structure field 'm' must have n entries");
  bool shared = true;
  if (j.contains("shared_local")) {
    if (!j["shared_local"].is_boolean()) throw ValidationError("'shared_local' must be a boolean");
    shared = j["shared_local"].get<bool>();
  }
  ModelStructure s = ModelStructure::dense(std::move(m), shared);
  if (j.contains("network_support")) {
    const Matrix sup = matrix_from_json(j["network_support"], "network_support");
    if (sup.rows() != n || sup.cols() != n) throw ValidationError("network_support must be n x n");
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) s.network_support[r][c] = sup(r, c) != 0;
  }
  s.validate();
  return s;
}

Json structure_to_json(const ModelStructure& s) {
  Json out;
  out["n"] = s.sites();
  out["m"] = s.m;
  out["shared_local"] = s.shared_local;
  Json sup = Json::array();
  for (const auto& row : s.network_support) {
    Json r = Json::array();
    for (bool b : row) r.push_back(b ? 1 : 0);
    sup.push_back(std::move(r));
  }
  out["network_support"] = std::move(sup);
  return out;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ComputationError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw ComputationError("failed writing '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace infmodel::io
