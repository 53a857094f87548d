#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sqlens/benchmark.hpp"
#include "sqlens/exec.hpp"
#include "sqlens/expert.hpp"
#include "sqlens/similarity.hpp"
#include "sqlens/vendor_json.hpp"

namespace sqlens {

/// Target SQL dialect of an episode. Only the local engine executes; the
/// cloud dialects parse and replay recorded results.
enum class Dialect { sqlite, bigquery, snowflake };

const char* dialect_name(Dialect d);
Dialect dialect_from_name(const std::string& name);  // throws Usage
/// The one execution verb the action grammar accepts under this dialect.
const char* dialect_exec_verb(Dialect d);

/// A step-by-step reasoning plan. Parsed from strict JSON with exactly the
/// keys `plan` (non-empty list of step strings) and `expected_csv_format`.
struct Plan {
  std::vector<std::string> steps;
  std::string expected_csv_format;
};

struct PlanCritique {
  bool update_plan = false;
  std::string feedback;
};

/// Outcome of the SQL review pass. When the response carries no usable [SQL]
/// section the original query is kept and has_revision stays false.
struct SqlCritique {
  std::string reasoning;
  std::string revised_sql;
  bool has_revision = false;
};

struct ValidationVerdict {
  bool valid_result = false;
  std::vector<std::string> columns_not_needed;
  bool result_empty = false;
  std::string suggest_fix;
};

/// One parsed action line. Exactly one `Action: NAME(key=value, ...)` line is
/// accepted per response; everything before it is the model's thought.
struct AgentAction {
  enum class Kind { exec_sql, terminate };

  Kind kind = Kind::terminate;
  std::string verb;
  std::string sql;          // exec only
  std::string save_path;    // exec only, may be empty
  std::string output_path;  // terminate only
  std::string thought;
};

/// Parses the action grammar. Quoted values may span lines and use backslash
/// escapes. Throws InvalidAction on zero or multiple Action lines, an unknown
/// verb, a verb of another dialect, or malformed arguments.
AgentAction parse_action(const std::string& raw, Dialect dialect);

/// Builds the plan prompt and parses the strict-JSON reply. A malformed reply
/// is re-asked once; a second failure throws PlanParse.
Plan make_plan(const std::string& question, const std::string& context, Expert& expert,
               const GenerationParams& params);

/// Asks whether the plan needs revision. Throws VerdictParse on a malformed
/// reply.
PlanCritique critique_plan(const Plan& plan, const std::string& question, Expert& expert,
                           const GenerationParams& params);

/// Parses the two-part [Reasoning]/[SQL] review format. Throws CritiqueParse
/// when both sections are missing or the [SQL] section carries no query.
SqlCritique parse_sql_critique(const std::string& response, const std::string& original_sql,
                               Dialect dialect);

/// Reviews one query against the plan. Any parse failure falls back to the
/// original SQL instead of surfacing an error.
SqlCritique critique_sql(const std::string& sql, const Plan& plan, Expert& expert,
                         const GenerationParams& params, Dialect dialect);

/// Parses the strict four-key validation verdict. Throws VerdictParse.
ValidationVerdict parse_verdict(const std::string& response);

/// Summarizes a rows outcome (column names, per-column null counts, row
/// count, first three rows) and asks for the four-key verdict. One retry on a
/// malformed reply; a second failure is reported as an invalid verdict rather
/// than an error.
ValidationVerdict validate_result(const std::string& question, const ExecResult& result,
                                  Expert& expert, const GenerationParams& params);

enum class RetrieveKind { knowledge, syntax };

/// Top-k corpus snippets by similarity to the query, ties broken by file
/// name. A missing or empty corpus directory yields zero snippets.
std::vector<std::string> retrieve(RetrieveKind kind, const std::string& query, std::size_t k,
                                  const std::filesystem::path& corpus_dir,
                                  const SimilarityProvider& provider);

/// Asks whether dialect-specific syntax clarification is needed; an
/// affirmative first word enables syntax retrieval.
bool syntax_gate(const std::string& question, Dialect dialect, Expert& expert,
                 const GenerationParams& params);

/// Result of the sandboxed environment exploration loop.
struct ExploreOutcome {
  std::string schema_text;          // compact schema on Terminate, accumulated reads otherwise
  bool terminated = false;          // false when forced out at the step cap
  int steps = 0;
  int sandbox_violations = 0;       // escape attempts rejected (each consumed a step)
  std::vector<std::string> reads;   // env-relative paths actually opened
  nlohmann::json log = nlohmann::json::array();
};

/// Drives the expert through read-only exploration of env_root (LIST, READ,
/// HEAD, SEARCH, Terminate). Paths resolving outside env_root are rejected
/// without being opened. Stops on Terminate or after max_steps.
ExploreOutcome explore_schema(const std::filesystem::path& env_root, Expert& expert,
                              const GenerationParams& params, int max_steps = 30);

struct AgentCaps {
  int plan_critiques = 3;
  int explore_steps = 30;
  int expert_calls = 40;
  int refine_iterations = 3;
};

/// Recorded executions for the replay-only cloud dialects, keyed by the
/// SHA-256 of the exact SQL text.
using CloudReplay = std::map<std::string, ExecResult>;

struct EpisodeOptions {
  Dialect dialect = Dialect::sqlite;
  AgentCaps caps;
  /// Bare act loop: no retrievers, no planner, no critiques, no validator.
  bool bare_act_loop = false;
  std::filesystem::path knowledge_dir;
  std::filesystem::path syntax_dir;
  /// When set, result.csv and episode.jsonl are written here.
  std::filesystem::path out_dir;
  const CloudReplay* cloud_replay = nullptr;
  GenerationParams params;
  ExecOptions exec;
};

/// Final state of one episode. failure is empty iff succeeded; otherwise it
/// starts with the failure class (for example StepCapExceeded). The log and
/// result bytes are deterministic functions of the transcript and fixtures.
struct EpisodeResult {
  bool succeeded = false;
  std::string failure;
  std::string final_sql;
  ExecResult final_execution;
  std::string result_csv;
  Plan plan;
  int expert_calls = 0;
  int plan_critique_rounds = 0;
  int explore_steps = 0;
  int sandbox_violations = 0;
  nlohmann::json advisory;  // validator notes recorded at termination
  nlohmann::json log = nlohmann::json::array();
};

/// Renders a rows outcome as CSV at full precision; nulls are empty cells.
std::string render_result_csv(const ExecResult& result);

/// One full plan-critique-act-refine-validate episode over a task. db may be
/// null only for cloud dialects. The machine always terminates: caps bound
/// every loop and no unparsed action is ever executed.
EpisodeResult run_episode(const BenchmarkItem& task, const std::filesystem::path& env_dir,
                          Database* db, Expert& expert, const EpisodeOptions& options);

}  // namespace sqlens
