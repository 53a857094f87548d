#include "sqlens/refine.hpp"

#include "sqlens/errors.hpp"
#include "sqlens/prompt.hpp"

namespace sqlens {

nlohmann::json refine_outcome_to_json(const RefineOutcome& o) {
  nlohmann::json attempts = nlohmann::json::array();
  for (const auto& a : o.attempts) {
    attempts.push_back(
        {{"sql", a.sql}, {"prompt", a.prompt}, {"execution", exec_result_to_json(a.execution)}});
  }
  return {{"candidate", candidate_to_json(o.candidate)}, {"attempts", attempts}, {"succeeded", o.succeeded}};
}

RefineOutcome refine_outcome_from_json(const nlohmann::json& j) {
  RefineOutcome o;
  o.candidate = candidate_from_json(j.at("candidate"));
  for (const auto& a : j.at("attempts")) {
    o.attempts.push_back({a.at("sql").get<std::string>(), a.at("prompt").get<std::string>(),
                          exec_result_from_json(a.at("execution"))});
  }
  o.succeeded = j.at("succeeded").get<bool>();
  return o;
}

RefineOutcome refine_candidate(SqlCandidate candidate, Expert& expert, Database& db,
                               const std::string& base_context, const GenerationParams& params,
                               const RefineOptions& options, const ExecOptions& exec_options) {
  RefineOutcome out;
  if (candidate.failed || candidate.sql.empty()) {
    out.candidate = std::move(candidate);
    return out;
  }

  std::string context = base_context;
  candidate.execution = db.execute(candidate.sql, exec_options);
  candidate.executed = true;
  out.attempts.push_back({candidate.sql, "", candidate.execution});

  while (out.attempts.back().execution.failed_or_empty() &&
         static_cast<int>(out.attempts.size()) < options.max_iterations) {
    const ExecResult& last = out.attempts.back().execution;
    PromptSpec spec;
    spec.kind = PromptKind::refine;
    spec.prior_context = context;
    spec.prior_sql = out.attempts.back().sql;
    spec.error_message = last.ok_rows() ? std::string{} : last.error_message;
    spec.error_kind = last.ok_rows() ? ErrorKind::NoResult : last.error_kind;
    std::string prompt = build_prompt(spec);

    std::string sql;
    try {
      sql = extract_sql(expert.complete(prompt, params));
    } catch (const Error&) {
      // A dead expert ends the loop; the candidate keeps its last state.
      break;
    }
    ExecResult result = db.execute(sql, exec_options);
    out.attempts.push_back({sql, prompt, result});
    candidate.sql = sql;
    candidate.execution = result;
    context = std::move(prompt);
  }

  const ExecResult& final_exec = out.attempts.back().execution;
  out.succeeded = final_exec.ok_rows() && !final_exec.rows.empty();
  out.candidate = std::move(candidate);
  return out;
}

}  // namespace sqlens
