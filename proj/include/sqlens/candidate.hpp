#pragma once

#include <cstddef>
#include <string>

#include "sqlens/exec.hpp"
#include "sqlens/vendor_json.hpp"

namespace sqlens {

/// One expert's answer for one item: the raw response, the SQL pulled out of
/// it, and the latest execution of that SQL. A candidate whose expert call or
/// SQL extraction failed stays in the pool (failed = true) so ensemble slots
/// keep their positions.
struct SqlCandidate {
  std::size_t expert_index = 0;
  std::string expert_name;
  std::string sql;
  std::string raw_response;
  bool failed = false;
  std::string failure_reason;
  bool executed = false;
  ExecResult execution;

  bool usable() const { return !failed && !sql.empty(); }
};

nlohmann::json candidate_to_json(const SqlCandidate& c);
SqlCandidate candidate_from_json(const nlohmann::json& j);

}  // namespace sqlens
