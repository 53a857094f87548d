#include "sqlens/settings.hpp"

#include <fmt/format.h>

#include <ctime>
#include <map>
#include <optional>
#include <random>

#include "sqlens/errors.hpp"
#include "sqlens/hash.hpp"

namespace sqlens {

namespace {

std::string now_iso8601() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json episode_to_json(const EpisodeResult& ep) {
  return {{"succeeded", ep.succeeded},
          {"failure", ep.failure},
          {"final_sql", ep.final_sql},
          {"expert_calls", ep.expert_calls},
          {"plan_critique_rounds", ep.plan_critique_rounds},
          {"explore_steps", ep.explore_steps},
          {"sandbox_violations", ep.sandbox_violations},
          {"advisory", ep.advisory},
          {"log", ep.log}};
}

SqlCandidate candidate_from_episode(const EpisodeResult& ep, std::size_t slot,
                                    const std::string& expert_name) {
  SqlCandidate c;
  c.expert_index = slot;
  c.expert_name = expert_name;
  if (!ep.succeeded) {
    c.failed = true;
    c.failure_reason = ep.failure;
    return c;
  }
  c.sql = ep.final_sql;
  c.executed = true;
  c.execution = ep.final_execution;
  return c;
}

using Tally = std::map<std::string, std::pair<std::size_t, std::size_t>>;

struct SettingRun {
  const SettingConfig& config;
  const BenchmarkSet& benchmark;
  const std::vector<Expert*>& experts;
  RunStore& store;
  std::string stage;
  bool ensemble;
  bool bare;

  VoteState wma_state;
  VoteState rwma_state;
  VoteState naive_state;
  std::mt19937_64 rwma_rng;

  Tally strategy_acc;
  Tally expert_acc;
  Tally difficulty_acc;

  SettingRun(const SettingConfig& cfg, const BenchmarkSet& bm, const std::vector<Expert*>& ex,
             RunStore& st)
      : config(cfg),
        benchmark(bm),
        experts(ex),
        store(st),
        stage(fmt::format("setting_{}", cfg.setting)),
        ensemble(cfg.setting == 5 || cfg.setting == 6),
        bare(cfg.setting == 1 || cfg.setting == 3),
        wma_state(ex.size(), bm.items.size()),
        rwma_state(ex.size(), bm.items.size()),
        naive_state(ex.size(), bm.items.size()),
        rwma_rng(cfg.seed) {
    // Unit weights forever: epsilon zero makes the multiplicative update a
    // no-op while mistake counts still accrue.
    naive_state.epsilon = 0.0;
  }

  /// Settings 1 and 2 use slot 0; 3 and 4 use slot 1 when the roster has one.
  std::size_t baseline_slot() const {
    if (config.setting <= 2) return 0;
    return std::min<std::size_t>(1, experts.size() - 1);
  }

  const char* headline() const { return config.setting == 6 ? "rwma" : "wma"; }

  std::filesystem::path env_dir_for(const BenchmarkItem& item) const {
    if (!config.env_root.empty()) return config.env_root / item.db_id;
    return benchmark.root / "database" / item.db_id;
  }

  EpisodeOptions episode_options(const BenchmarkItem& item, const std::string& expert_name) const {
    EpisodeOptions opt;
    opt.dialect = config.dialect;
    opt.caps = config.caps;
    opt.bare_act_loop = bare;
    opt.knowledge_dir = config.knowledge_dir;
    opt.syntax_dir = config.syntax_dir;
    if (!config.out_root.empty()) {
      opt.out_dir = config.out_root / item.item_id;
      if (ensemble) opt.out_dir /= expert_name;
    }
    opt.cloud_replay = config.cloud_replay;
    opt.params = config.params;
    opt.exec = config.exec;
    return opt;
  }

  /// Gold rows for scoring: a local execution, or the recorded one keyed by
  /// the gold SQL's digest when the dialect never executes locally.
  ExecResult gold_execution(const BenchmarkItem& item, Database* db) const {
    if (!item.gold_sql) return ExecResult::make_error(ErrorKind::NoResult, "no gold query");
    if (db != nullptr) return db->execute(*item.gold_sql, config.exec);
    if (config.cloud_replay != nullptr) {
      auto it = config.cloud_replay->find(sha256_hex(*item.gold_sql));
      if (it != config.cloud_replay->end()) return it->second;
    }
    return ExecResult::make_error(ErrorKind::Other, "no recorded execution for the gold query");
  }

  void tally(Tally& t, const std::string& name, bool correct) {
    auto& [c, total] = t[name];
    if (correct) ++c;
    ++total;
  }

  bool candidate_correct(const SqlCandidate& c, const ExecResult* gold, bool order_sensitive) const {
    return gold != nullptr && c.usable() && c.executed &&
           execution_match(c.execution, *gold, order_sensitive);
  }

  void score_single(const BenchmarkItem& item, const SqlCandidate& cand, const ExecResult* gold,
                    bool order_sensitive) {
    bool correct = candidate_correct(cand, gold, order_sensitive);
    tally(strategy_acc, "episode", correct);
    tally(expert_acc, cand.expert_name, correct);
    tally(difficulty_acc, difficulty_name(item.difficulty), correct);
  }

  void score_ensemble(const BenchmarkItem& item, const std::vector<SqlCandidate>& cands,
                      const nlohmann::json& votes, const ExecResult* gold, bool order_sensitive) {
    std::vector<int> losses;
    try {
      losses = loss_vector(cands, gold, config.loss, order_sensitive);
    } catch (const Error&) {
      losses.assign(experts.size(), 1);
    }

    auto strategy_outcome = [&](const char* name) -> std::pair<bool, int> {
      const auto& d = votes.at(name);
      std::size_t idx = d.at("candidate_index").get<std::size_t>();
      const SqlCandidate& chosen = cands.at(idx);
      bool correct = candidate_correct(chosen, gold, order_sensitive);
      int loss;
      if (config.loss == LossMode::supervised) {
        loss = correct ? 0 : 1;
      } else {
        loss = (!chosen.usable() || !chosen.executed || chosen.execution.failed_or_empty()) ? 1 : 0;
      }
      return {correct, loss};
    };

    auto [wma_correct, wma_loss] = strategy_outcome("wma");
    auto [rwma_correct, rwma_loss] = strategy_outcome("rwma");
    auto [naive_correct, naive_loss] = strategy_outcome("naive");
    update_weights(wma_state, losses, wma_loss);
    update_weights(rwma_state, losses, rwma_loss);
    update_weights(naive_state, losses, naive_loss);

    tally(strategy_acc, "wma", wma_correct);
    tally(strategy_acc, "rwma", rwma_correct);
    tally(strategy_acc, "naive", naive_correct);
    for (std::size_t i = 0; i < cands.size(); ++i) {
      tally(expert_acc, experts[i]->name(), candidate_correct(cands[i], gold, order_sensitive));
    }
    bool head = std::string(headline()) == "rwma" ? rwma_correct : wma_correct;
    tally(difficulty_acc, difficulty_name(item.difficulty), head);
  }

  void score_aborted(const BenchmarkItem& item) {
    if (ensemble) {
      std::vector<int> losses(experts.size(), 1);
      update_weights(wma_state, losses, 1);
      update_weights(rwma_state, losses, 1);
      update_weights(naive_state, losses, 1);
      tally(strategy_acc, "wma", false);
      tally(strategy_acc, "rwma", false);
      tally(strategy_acc, "naive", false);
      for (Expert* e : experts) tally(expert_acc, e->name(), false);
    } else {
      tally(strategy_acc, "episode", false);
      tally(expert_acc, experts[baseline_slot()]->name(), false);
    }
    tally(difficulty_acc, difficulty_name(item.difficulty), false);
  }

  RunRecord process_item(const BenchmarkItem& item) {
    std::filesystem::path env_dir = env_dir_for(item);
    std::optional<Database> db_storage;
    Database* db = nullptr;
    if (config.dialect == Dialect::sqlite) {
      db_storage.emplace(benchmark.database_path(item.db_id).string());
      db = &*db_storage;
    }

    ExecResult gold_exec = gold_execution(item, db);
    const ExecResult* gold = nullptr;
    bool order_sensitive = false;
    if (item.gold_sql && gold_exec.ok_rows()) {
      gold = &gold_exec;
      order_sensitive = order_sensitive_for_gold(*item.gold_sql);
    }

    RunRecord record;
    record.item_id = item.item_id;
    record.stage_id = stage;
    record.refinements = nlohmann::json::array();
    record.extra = {{"setting", config.setting}, {"dialect", dialect_name(config.dialect)}};

    if (ensemble) {
      std::vector<SqlCandidate> cands;
      nlohmann::json episodes = nlohmann::json::array();
      for (std::size_t i = 0; i < experts.size(); ++i) {
        EpisodeResult ep = run_episode(item, env_dir, db, *experts[i],
                                       episode_options(item, experts[i]->name()));
        episodes.push_back(episode_to_json(ep));
        cands.push_back(candidate_from_episode(ep, i, experts[i]->name()));
      }
      record.extra["episodes"] = std::move(episodes);

      auto groups = group_candidates(cands, config.grouping, order_sensitive);
      record.votes["wma"] = decision_to_json(select_wma(wma_state, groups));
      record.votes["rwma"] = decision_to_json(select_rwma(rwma_state, groups, rwma_rng));
      record.votes["naive"] = decision_to_json(select_naive(groups));
      record.candidates = cands;
      score_ensemble(item, cands, record.votes, gold, order_sensitive);
    } else {
      std::size_t slot = baseline_slot();
      EpisodeResult ep =
          run_episode(item, env_dir, db, *experts[slot], episode_options(item, experts[slot]->name()));
      record.extra["episode"] = episode_to_json(ep);
      SqlCandidate cand = candidate_from_episode(ep, slot, experts[slot]->name());
      record.candidates = {cand};
      score_single(item, cand, gold, order_sensitive);
    }
    record.timestamp = now_iso8601();
    return record;
  }

  std::string finish() {
    if (ensemble) {
      store.append_summary(vote_summary_from_state(stage, "wma", wma_state));
      store.append_summary(vote_summary_from_state(stage, "rwma", rwma_state));
      store.append_summary(vote_summary_from_state(stage, "naive", naive_state));
    }

    std::vector<AccuracyRow> rows;
    if (ensemble) {
      for (const char* s : {"wma", "rwma", "naive"}) {
        auto [c, t] = strategy_acc[s];
        rows.push_back({s, "strategy", c, t});
      }
      for (Expert* e : experts) {
        auto [c, t] = expert_acc[e->name()];
        rows.push_back({e->name(), "expert", c, t});
      }
    } else {
      auto [c, t] = strategy_acc["episode"];
      rows.push_back({"episode", "strategy", c, t});
      const std::string& name = experts[baseline_slot()]->name();
      auto [ec, et] = expert_acc[name];
      rows.push_back({name, "expert", ec, et});
    }
    for (Difficulty d : {Difficulty::easy, Difficulty::medium, Difficulty::hard, Difficulty::unknown}) {
      auto it = difficulty_acc.find(difficulty_name(d));
      if (it != difficulty_acc.end()) {
        rows.push_back({difficulty_name(d), "difficulty", it->second.first, it->second.second});
      }
    }
    store.append_accuracy(stage, rows);
    return fmt::format("{}-n{}", stage, benchmark.items.size());
  }
};

}  // namespace

std::string run_setting(const SettingConfig& config, const BenchmarkSet& benchmark,
                        const std::vector<Expert*>& experts, RunStore& store) {
  if (config.setting < 1 || config.setting > 6) {
    throw Error(Errc::usage, fmt::format("unknown setting {}", config.setting));
  }
  if (experts.empty()) throw Error(Errc::usage, "at least one expert is required");
  if (config.dialect != Dialect::sqlite && config.cloud_replay == nullptr) {
    throw Error(Errc::usage, "cloud dialects need recorded executions");
  }

  SettingRun run(config, benchmark, experts, store);
  for (const auto& item : benchmark.items) {
    RunRecord record;
    try {
      record = run.process_item(item);
    } catch (const std::exception& e) {
      record = RunRecord{};
      record.item_id = item.item_id;
      record.stage_id = run.stage;
      record.refinements = nlohmann::json::array();
      record.extra = {{"error", e.what()}};
      record.timestamp = now_iso8601();
      run.score_aborted(item);
      store.append(record);
      continue;
    }
    store.append(record);
  }
  return run.finish();
}

}  // namespace sqlens
