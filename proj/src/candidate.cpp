#include "sqlens/candidate.hpp"

namespace sqlens {

nlohmann::json candidate_to_json(const SqlCandidate& c) {
  nlohmann::json j = {{"expert_index", c.expert_index},
                      {"expert_name", c.expert_name},
                      {"sql", c.sql},
                      {"raw_response", c.raw_response},
                      {"failed", c.failed},
                      {"failure_reason", c.failure_reason},
                      {"executed", c.executed}};
  if (c.executed) j["execution"] = exec_result_to_json(c.execution);
  return j;
}

SqlCandidate candidate_from_json(const nlohmann::json& j) {
  SqlCandidate c;
  c.expert_index = j.at("expert_index").get<std::size_t>();
  c.expert_name = j.at("expert_name").get<std::string>();
  c.sql = j.at("sql").get<std::string>();
  c.raw_response = j.at("raw_response").get<std::string>();
  c.failed = j.at("failed").get<bool>();
  c.failure_reason = j.at("failure_reason").get<std::string>();
  c.executed = j.at("executed").get<bool>();
  if (c.executed) c.execution = exec_result_from_json(j.at("execution"));
  return c;
}

}  // namespace sqlens
