#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace infmodel::cli {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kInvalidInput = 2 };

/// Parsed command line. Caps default from INFMODEL_MAX_STATES,
/// INFMODEL_MAX_HORIZON and INFMODEL_MAX_RESTARTS when set.
struct RunConfig {
  std::string subcommand;
  std::string model_path, chain_path, data_path, fixture_path;
  std::string out_path, report_path, obs_out_path;
  std::vector<int> observed;  // 1-based as given
  std::string init = "stationary";
  std::optional<std::size_t> class_id;  // 1-based as given
  std::size_t T = 0;
  std::uint64_t seed = 0;
  int horizon = 2;
  std::string estimator;
  int restarts = 0;  // 0: estimator default
  int max_iters = 500;
  double tol = 1e-9;
  double smoothing = 1e-8;
  std::size_t max_states = std::size_t{1} << 20;
  int max_horizon = 12;
  int max_restarts = 64;
};

/// Runs one subcommand; human-readable text goes to `out`, diagnostics to
/// `err`, machine-readable documents to the files named by the flags.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace infmodel::cli
