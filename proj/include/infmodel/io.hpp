#pragma once

// JSON documents for models, chains, trajectories and observations. Sites and
// statuses are 1-based in every document.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "infmodel/estimation.hpp"
#include "infmodel/master_chain.hpp"
#include "infmodel/model.hpp"
#include "infmodel/sim.hpp"

namespace infmodel::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kCodecName = "lexicographic-site1-major";

/// A model plus optional display labels for the statuses (shared by all sites).
struct ModelDocument {
  InfluenceModel model;
  std::vector<std::string> labels;
};

Json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const Json& j, const std::string& what);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j, const std::string& what);

Json model_to_json(const InfluenceModel& model, const std::vector<std::string>& labels = {});
/// Parses and validates; ValidationError on unknown keys or violated invariants.
ModelDocument model_from_json(const Json& j);

Json chain_to_json(const MasterChain& chain, const std::vector<std::string>& labels = {});
MasterChain chain_from_json(const Json& j, std::vector<std::string>* labels = nullptr);

Json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const Json& j);

Json observations_to_json(const ObservationSequence& obs, const std::vector<int>& m,
                          std::uint64_t fingerprint, std::uint64_t seed);
/// Returns the sequence; `m` receives the full status counts.
ObservationSequence observations_from_json(const Json& j, std::vector<int>* m = nullptr);

/// Accepts either a structure document {n, m, shared_local, network_support}
/// or a full model document (its skeleton is used).
ModelStructure structure_from_json(const Json& j);
Json structure_to_json(const ModelStructure& s);

/// 1-based tuples <-> 0-based states.
Json state_to_json(const JointState& s);
JointState state_from_json(const Json& j, const std::vector<int>& m);

std::string fingerprint_hex(std::uint64_t fp);
std::uint64_t fingerprint_from_hex(const std::string& s);

Json read_json_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see partial output.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string dump(const Json& j);

}  // namespace infmodel::io
