#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqlens/benchmark.hpp"
#include "sqlens/expert.hpp"
#include "sqlens/run_store.hpp"
#include "sqlens/vote.hpp"

namespace sqlens {

/// Pipeline stages in increasing feature order. Stage 6 exists per voting
/// strategy because its mid-pipeline vote decides which SQL drives schema
/// linking, so the strategy changes the data path, not just the report.
enum class StageId { s1, s2, s3, s4, s5, s6_wma, s6_rwma, s6_naive };

const char* stage_id_name(StageId id);
StageId stage_id_from_name(const std::string& name);  // throws Usage

struct StageConfig {
  StageId stage = StageId::s1;
  std::size_t k_few_shot = 9;
  /// Executions per refinement loop, counting the initial one. Must be 0 for
  /// s1 and s2 (they have no refinement); 0 elsewhere means the default 3.
  int refine_cap = 0;
  GroupKeying grouping = GroupKeying::fingerprint;
  LossMode loss = LossMode::supervised;
  std::uint64_t seed = 0;
  std::chrono::milliseconds exec_timeout{30'000};
  GenerationParams params;
};

/// Rejects configs whose flags contradict the stage definition.
void validate_stage_config(const StageConfig& config);

/// Feature flags implied by the stage id.
struct StageShape {
  bool link = false;        // schema-linked second generation before the vote
  bool refine = false;      // execution-guided refinement before the vote
  bool link_from_vote = false;  // linking consumes the voted winner (s5/s6)
};
StageShape stage_shape(StageId id);

/// Runs one stage over the whole benchmark, appending one RunRecord per item
/// plus vote summaries and an accuracy table to the store. Per-item failures
/// score zero and never abort the run. s6 variants require the store to
/// already hold this benchmark's s5 records and verify their lineage digests.
/// Returns the run id.
std::string run_stage(const StageConfig& config, const BenchmarkSet& benchmark,
                      const std::vector<Expert*>& experts, RunStore& store);

/// Digest binding a stage record's downstream artifacts; s6 refuses s5
/// records whose recomputed digest disagrees.
std::string lineage_digest(const nlohmann::json& artifacts);

}  // namespace sqlens
