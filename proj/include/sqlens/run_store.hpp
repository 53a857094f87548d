#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "sqlens/candidate.hpp"
#include "sqlens/vendor_json.hpp"
#include "sqlens/vote.hpp"

namespace sqlens {

/// Everything one pipeline stage produced for one benchmark item.
struct RunRecord {
  std::string item_id;
  std::string stage_id;
  std::vector<SqlCandidate> candidates;  // slot order matches the ensemble
  nlohmann::json votes;        // strategy name -> vote decision
  nlohmann::json refinements;  // array of refinement traces, slot order
  nlohmann::json extra;        // stage-specific artifacts (lineage, links)
  std::string timestamp;       // ISO-8601 UTC, informational only
};

nlohmann::json run_record_to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

/// Aggregate learner state for one (stage, strategy), the raw material for
/// trajectory and regret reports.
struct VoteSummary {
  std::string stage_id;
  std::string strategy;  // wma | rwma | naive
  std::size_t n_experts = 0;
  double epsilon = 0.0;
  std::vector<std::vector<double>> weight_trajectory;
  std::vector<std::size_t> algorithm_history;
  std::vector<std::size_t> best_history;
};

VoteSummary vote_summary_from_state(const std::string& stage_id, const std::string& strategy,
                                    const VoteState& state);

/// One accuracy tally: kind says what name designates (strategy, expert, or
/// difficulty bucket).
struct AccuracyRow {
  std::string name;
  std::string kind;
  std::size_t correct = 0;
  std::size_t total = 0;
};

/// Append-only log of run artifacts, one JSON object per line. Three line
/// types share the file: per-item records, per-strategy vote summaries, and
/// accuracy tables. A complete run holds exactly one record per (item,
/// stage); re-appending a key throws DuplicateKey. Single writer, and every
/// append is flushed so concurrent readers see a clean prefix.
class RunStore {
 public:
  /// Opens for append, loading any existing lines first.
  static RunStore open(const std::filesystem::path& path);

  void append(const RunRecord& record);
  void append_summary(const VoteSummary& summary);
  void append_accuracy(const std::string& stage_id, const std::vector<AccuracyRow>& rows);

  const std::vector<RunRecord>& records() const { return records_; }
  const std::vector<VoteSummary>& summaries() const { return summaries_; }
  /// Latest accuracy table for the stage, empty when none was written.
  std::vector<AccuracyRow> accuracy_for(const std::string& stage_id) const;
  /// Every (stage, table) pair in append order; a stage may repeat.
  const std::vector<std::pair<std::string, std::vector<AccuracyRow>>>& accuracy_tables() const {
    return accuracy_;
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  RunStore() = default;
  void write_line(const nlohmann::json& j);

  std::filesystem::path path_;
  std::vector<RunRecord> records_;
  std::vector<VoteSummary> summaries_;
  std::vector<std::pair<std::string, std::vector<AccuracyRow>>> accuracy_;
  std::set<std::pair<std::string, std::string>> record_keys_;
  std::set<std::pair<std::string, std::string>> summary_keys_;
};

enum class ReportKind { accuracy_table, weight_trajectory, regret_series };

/// Renders one CSV report from the store. Headers are fixed:
///   accuracy_table    name,kind,correct,total,accuracy
///   weight_trajectory round,expert_1,...,expert_N
///   regret_series     round,algorithm,mistakes,best_expert_mistakes,avg_regret
/// weight_trajectory uses the latest summary with a trajectory; regret rows
/// are grouped by algorithm and ordered by round. Throws EmptyStore when the
/// store has nothing of the requested kind.
std::string export_report(const RunStore& store, ReportKind kind);

}  // namespace sqlens
