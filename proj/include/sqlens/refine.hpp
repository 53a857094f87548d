#pragma once

#include <string>
#include <vector>

#include "sqlens/candidate.hpp"
#include "sqlens/exec.hpp"
#include "sqlens/expert.hpp"

namespace sqlens {

/// One execution inside the refinement loop. The first attempt is the
/// original SQL with an empty prompt; later attempts carry the rewrite
/// prompt that produced them.
struct RefineAttempt {
  std::string sql;
  std::string prompt;
  ExecResult execution;
};

struct RefineOptions {
  /// Cap on executions, counting the initial one. 3 means at most two
  /// rewrites.
  int max_iterations = 3;
};

/// Outcome of refining one candidate. The candidate is always retained with
/// its last SQL and execution, so downstream voting sees every slot whether
/// or not the loop converged.
struct RefineOutcome {
  SqlCandidate candidate;
  std::vector<RefineAttempt> attempts;
  /// True iff the final execution returned at least one row.
  bool succeeded = false;
};

nlohmann::json refine_outcome_to_json(const RefineOutcome& o);
RefineOutcome refine_outcome_from_json(const nlohmann::json& j);

/// Execute the candidate's SQL and, while the result is an error or has zero
/// rows, ask the same expert for a rewrite and execute that. Each rewrite
/// prompt extends the previous prompt with the failing SQL, the verbatim
/// error, the detected error type, and its strategy menu, so context grows
/// monotonically. base_context is the prompt that produced the original SQL.
/// Candidates whose expert call already failed pass through untouched.
RefineOutcome refine_candidate(SqlCandidate candidate, Expert& expert, Database& db,
                               const std::string& base_context, const GenerationParams& params,
                               const RefineOptions& options = {}, const ExecOptions& exec_options = {});

}  // namespace sqlens
