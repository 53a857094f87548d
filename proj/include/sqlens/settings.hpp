#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sqlens/agent.hpp"
#include "sqlens/benchmark.hpp"
#include "sqlens/run_store.hpp"
#include "sqlens/vote.hpp"

namespace sqlens {

/// Experiment settings over agent episodes:
///   1, 3  bare act loop baseline, one expert
///   2, 4  full agent (plan, critiques, refine, validate), one expert
///   5, 6  full agent per expert plus voting over result fingerprints;
///         the headline strategy is the multiplicative learner for 5 and its
///         randomized variant for 6
/// Odd/even pairs differ only in which expert slot they use: 1 and 2 take
/// slot 0, 3 and 4 take slot 1 when present.
struct SettingConfig {
  int setting = 1;  // 1..6
  Dialect dialect = Dialect::sqlite;
  AgentCaps caps;
  GenerationParams params;
  std::uint64_t seed = 0;
  GroupKeying grouping = GroupKeying::fingerprint;
  LossMode loss = LossMode::supervised;
  /// Exploration root; <env_root>/<db_id> is each task's sandbox. Empty
  /// falls back to the benchmark's database folder.
  std::filesystem::path env_root;
  /// When set, episode artifacts land under <out_root>/<item>[/<expert>].
  std::filesystem::path out_root;
  std::filesystem::path knowledge_dir;
  std::filesystem::path syntax_dir;
  const CloudReplay* cloud_replay = nullptr;
  ExecOptions exec;
};

/// Runs one setting over the whole benchmark, appending one record per item
/// plus accuracy tables (and, for 5/6, vote summaries) to the store. Returns
/// the run id. Throws Usage on an unknown setting or an empty expert list.
std::string run_setting(const SettingConfig& config, const BenchmarkSet& benchmark,
                        const std::vector<Expert*>& experts, RunStore& store);

}  // namespace sqlens
