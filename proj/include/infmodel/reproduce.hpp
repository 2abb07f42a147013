#pragma once

#include <string>
#include <vector>

#include "infmodel/io.hpp"

namespace infmodel {

/// Two sites, binary statuses, D = [[.6,.4],[.3,.7]], shared A = [[.9,.1],[.2,.8]].
InfluenceModel reference_model();

/// n binary sites that copy a uniformly chosen site (identity local matrix).
InfluenceModel binary_copy_model(int n);

struct ReproductionCheck {
  std::string id;
  std::string claim;
  bool pass = false;
  double observed = 0;
  double expected = 0;
  double tolerance = 0;
  std::string detail;
};

struct ReproductionReport {
  std::vector<ReproductionCheck> checks;
  io::Json details;  // label-convention comparison, chain, conditionals
  bool all_pass() const;
  io::Json to_json() const;
};

/// Bundled fixture: reference model, expected chain, published conditionals.
io::Json default_reproduction_fixture();

/// Runs every check in the fixture. Deterministic: identical fixtures give
/// byte-identical reports.
ReproductionReport reproduce(const io::Json& fixture);

}  // namespace infmodel
