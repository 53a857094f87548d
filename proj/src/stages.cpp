#include "sqlens/stages.hpp"

#include <fmt/format.h>

#include <ctime>
#include <map>
#include <random>

#include "sqlens/errors.hpp"
#include "sqlens/exec.hpp"
#include "sqlens/hash.hpp"
#include "sqlens/linker.hpp"
#include "sqlens/prompt.hpp"
#include "sqlens/refine.hpp"
#include "sqlens/similarity.hpp"

namespace sqlens {

const char* stage_id_name(StageId id) {
  switch (id) {
    case StageId::s1: return "s1";
    case StageId::s2: return "s2";
    case StageId::s3: return "s3";
    case StageId::s4: return "s4";
    case StageId::s5: return "s5";
    case StageId::s6_wma: return "s6_wma";
    case StageId::s6_rwma: return "s6_rwma";
    case StageId::s6_naive: return "s6_naive";
  }
  return "s1";
}

StageId stage_id_from_name(const std::string& name) {
  for (StageId id : {StageId::s1, StageId::s2, StageId::s3, StageId::s4, StageId::s5, StageId::s6_wma,
                     StageId::s6_rwma, StageId::s6_naive}) {
    if (name == stage_id_name(id)) return id;
  }
  throw Error(Errc::usage, fmt::format("unknown stage id {}", name));
}

StageShape stage_shape(StageId id) {
  switch (id) {
    case StageId::s1: return {false, false, false};
    case StageId::s2: return {true, false, false};
    case StageId::s3: return {false, true, false};
    case StageId::s4: return {true, true, false};
    case StageId::s5: return {true, true, true};
    case StageId::s6_wma:
    case StageId::s6_rwma:
    case StageId::s6_naive: return {true, true, true};
  }
  return {};
}

void validate_stage_config(const StageConfig& config) {
  StageShape shape = stage_shape(config.stage);
  if (!shape.refine && config.refine_cap != 0) {
    throw Error(Errc::usage, fmt::format("stage {} has no refinement; drop the refinement cap",
                                         stage_id_name(config.stage)));
  }
  if (config.refine_cap < 0) throw Error(Errc::usage, "refinement cap must be non-negative");
  if (config.k_few_shot > 64) throw Error(Errc::usage, "few-shot k above 64 is unsupported");
}

std::string lineage_digest(const nlohmann::json& artifacts) { return sha256_hex(artifacts.dump()); }

namespace {

const char* kInstruction =
    "You are given a database schema and sampled cell values. Write one SQLite SELECT statement "
    "that answers the question. Reply with only the SQL inside a ```sql code block.";

std::string now_iso8601() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json link_to_json(const LinkedSchema& link) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : link.tables) tables.push_back(t);
  nlohmann::json columns = nlohmann::json::array();
  for (const auto& [t, c] : link.columns) columns.push_back({t, c});
  return {{"tables", tables}, {"columns", columns}};
}

void execute_usable(std::vector<SqlCandidate>& candidates, Database& db, const ExecOptions& opts) {
  for (auto& c : candidates) {
    if (!c.usable()) continue;
    c.execution = db.execute(c.sql, opts);
    c.executed = true;
  }
}

/// Union of references over every usable candidate's SQL.
LinkedSchema link_from_candidates(const std::vector<SqlCandidate>& candidates,
                                  const DatabaseSchema& schema) {
  std::vector<SqlReferenceSet> refs;
  for (const auto& c : candidates) {
    if (c.usable()) refs.push_back(extract_references(c.sql, schema));
  }
  return union_links(refs, schema);
}

/// Accuracy bookkeeping: name -> (correct, total).
using Tally = std::map<std::string, std::pair<std::size_t, std::size_t>>;

struct StageRun {
  const StageConfig& config;
  StageShape shape;
  int refine_cap;
  ExecOptions exec_opts;
  const BenchmarkSet& benchmark;
  const std::vector<Expert*>& experts;
  RunStore& store;

  std::vector<Demonstration> pool;
  VoteState wma_state;
  VoteState rwma_state;
  VoteState naive_state;
  std::mt19937_64 rwma_rng;

  Tally strategy_acc;
  Tally expert_acc;
  Tally difficulty_acc;

  StageRun(const StageConfig& cfg, const BenchmarkSet& bm, const std::vector<Expert*>& ex, RunStore& st)
      : config(cfg),
        shape(stage_shape(cfg.stage)),
        refine_cap(cfg.refine_cap == 0 ? 3 : cfg.refine_cap),
        benchmark(bm),
        experts(ex),
        store(st),
        wma_state(ex.size(), bm.items.size()),
        rwma_state(ex.size(), bm.items.size()),
        naive_state(ex.size(), bm.items.size()),
        rwma_rng(cfg.seed) {
    exec_opts.timeout = cfg.exec_timeout;
    // Unit weights forever: epsilon zero makes the multiplicative update a
    // no-op while mistake counts still accrue.
    naive_state.epsilon = 0.0;
    for (const auto& item : bm.items) {
      if (item.gold_sql) pool.push_back({item.question, *item.gold_sql});
    }
  }

  VoteStrategy headline_strategy() const {
    switch (config.stage) {
      case StageId::s6_rwma: return VoteStrategy::rwma;
      case StageId::s6_naive: return VoteStrategy::naive;
      default: return VoteStrategy::wma;
    }
  }

  PromptSpec generation_spec(PromptKind kind, const DatabaseSchema& schema,
                             const BenchmarkItem& item) const {
    PromptSpec spec;
    spec.kind = kind;
    spec.instruction = kInstruction;
    spec.schema_text = render_full_ddl(schema, false);
    spec.cell_samples = render_cell_samples(schema);
    spec.demonstrations = select_few_shots(item.question, pool, config.k_few_shot, HashedBagOfWords{});
    spec.question = item.question;
    spec.evidence = item.evidence;
    return spec;
  }

  /// Prune toward the link; an unusable link keeps the full schema so the
  /// item still runs.
  DatabaseSchema pruned_or_full(const DatabaseSchema& schema, const LinkedSchema& link,
                                bool* used_full) const {
    *used_full = false;
    if (!link.empty()) {
      try {
        return prune(schema, link);
      } catch (const Error&) {
      }
    }
    *used_full = true;
    return schema;
  }

  nlohmann::json refine_all(std::vector<SqlCandidate>& candidates, Database& db,
                            const std::string& base_context) {
    nlohmann::json traces = nlohmann::json::array();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      RefineOutcome outcome = refine_candidate(std::move(candidates[i]), *experts[i], db, base_context,
                                               config.params, {refine_cap}, exec_opts);
      candidates[i] = outcome.candidate;
      traces.push_back(refine_outcome_to_json(outcome));
    }
    return traces;
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

  void score_and_update(const BenchmarkItem& item, const std::vector<SqlCandidate>& final_cands,
                        const nlohmann::json& votes, const ExecResult* gold, bool order_sensitive) {
    std::vector<int> losses;
    try {
      losses = loss_vector(final_cands, gold, config.loss, order_sensitive);
    } catch (const Error&) {
      losses.assign(experts.size(), 1);
    }

    auto strategy_outcome = [&](const char* name) -> std::pair<bool, int> {
      const auto& d = votes.at(name);
      std::size_t idx = d.at("candidate_index").get<std::size_t>();
      const SqlCandidate& chosen = final_cands.at(idx);
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
    for (std::size_t i = 0; i < final_cands.size(); ++i) {
      tally(expert_acc, experts[i]->name(), candidate_correct(final_cands[i], gold, order_sensitive));
    }
    bool headline = headline_strategy() == VoteStrategy::rwma
                        ? rwma_correct
                        : (headline_strategy() == VoteStrategy::naive ? naive_correct : wma_correct);
    tally(difficulty_acc, difficulty_name(item.difficulty), headline);
  }

  void score_aborted(const BenchmarkItem& item) {
    std::vector<int> losses(experts.size(), 1);
    update_weights(wma_state, losses, 1);
    update_weights(rwma_state, losses, 1);
    update_weights(naive_state, losses, 1);
    tally(strategy_acc, "wma", false);
    tally(strategy_acc, "rwma", false);
    tally(strategy_acc, "naive", false);
    for (Expert* e : experts) tally(expert_acc, e->name(), false);
    tally(difficulty_acc, difficulty_name(item.difficulty), false);
  }

  nlohmann::json vote_all(const std::vector<SqlCandidate>& final_cands, bool order_sensitive) {
    auto groups = group_candidates(final_cands, config.grouping, order_sensitive);
    nlohmann::json votes;
    votes["wma"] = decision_to_json(select_wma(wma_state, groups));
    votes["rwma"] = decision_to_json(select_rwma(rwma_state, groups, rwma_rng));
    votes["naive"] = decision_to_json(select_naive(groups));
    return votes;
  }

  RunRecord process_item(const BenchmarkItem& item) {
    const DatabaseSchema& catalog_schema = benchmark.catalog.at(item.db_id);
    DatabaseSchema schema = catalog_schema;
    Database db(benchmark.database_path(item.db_id).string());
    sample_cells(db, schema, 3, config.seed);

    ExecResult gold_exec;
    const ExecResult* gold = nullptr;
    bool order_sensitive = false;
    if (item.gold_sql) {
      gold_exec = db.execute(*item.gold_sql, exec_opts);
      if (gold_exec.ok_rows()) {
        gold = &gold_exec;
        order_sensitive = order_sensitive_for_gold(*item.gold_sql);
      }
    }

    RunRecord record;
    record.item_id = item.item_id;
    record.stage_id = stage_id_name(config.stage);
    record.refinements = nlohmann::json::array();
    record.extra = nlohmann::json::object();

    if (config.stage == StageId::s6_wma || config.stage == StageId::s6_rwma ||
        config.stage == StageId::s6_naive) {
      run_s6(item, schema, db, gold, order_sensitive, record);
    } else {
      run_pipeline(item, schema, db, gold, order_sensitive, record);
    }
    record.timestamp = now_iso8601();
    return record;
  }

  void run_pipeline(const BenchmarkItem& item, const DatabaseSchema& schema, Database& db,
                    const ExecResult* gold, bool order_sensitive, RunRecord& record) {
    PromptSpec presql_spec = generation_spec(PromptKind::presql, schema, item);
    std::string presql_prompt = build_prompt(presql_spec);
    std::vector<SqlCandidate> presql = query_ensemble(experts, presql_prompt, config.params);

    std::vector<SqlCandidate> final_cands;
    std::string final_context = presql_prompt;

    if (config.stage == StageId::s5) {
      // SR then vote; the voted winner drives linking per strategy.
      record.refinements = refine_all(presql, db, presql_prompt);
      final_cands = presql;
      record.votes = vote_all(final_cands, order_sensitive);

      nlohmann::json chains = nlohmann::json::object();
      for (const char* strategy : {"wma", "rwma", "naive"}) {
        std::size_t idx = record.votes.at(strategy).at("candidate_index").get<std::size_t>();
        chains[strategy] = build_chain(final_cands.at(idx), schema, item, db);
      }
      record.extra["chains"] = chains;
      record.extra["lineage_id"] = lineage_digest(chains);
    } else {
      if (shape.link) {
        execute_usable(presql, db, exec_opts);
        LinkedSchema link = link_from_candidates(presql, schema);
        bool used_full = false;
        DatabaseSchema pruned = pruned_or_full(schema, link, &used_full);
        record.extra["link"] = link_to_json(link);
        record.extra["link_fallback_full_schema"] = used_full;

        PromptSpec post_spec = generation_spec(PromptKind::postsql, pruned, item);
        std::string post_prompt = build_prompt(post_spec);
        record.extra["presql"] = nlohmann::json::array();
        for (const auto& c : presql) record.extra["presql"].push_back(candidate_to_json(c));
        final_cands = query_ensemble(experts, post_prompt, config.params);
        final_context = post_prompt;
      } else {
        final_cands = std::move(presql);
      }

      if (shape.refine) {
        record.refinements = refine_all(final_cands, db, final_context);
      } else {
        execute_usable(final_cands, db, exec_opts);
      }
      record.votes = vote_all(final_cands, order_sensitive);
    }

    record.candidates = final_cands;
    score_and_update(item, final_cands, record.votes, gold, order_sensitive);
  }

  /// One s5 downstream chain: link from the winner, generate PostSQL, execute.
  nlohmann::json build_chain(const SqlCandidate& winner, const DatabaseSchema& schema,
                             const BenchmarkItem& item, Database& db) {
    LinkedSchema link;
    if (winner.usable()) link = union_links({extract_references(winner.sql, schema)}, schema);
    bool used_full = false;
    DatabaseSchema pruned = pruned_or_full(schema, link, &used_full);
    PromptSpec post_spec = generation_spec(PromptKind::postsql, pruned, item);
    std::string post_prompt = build_prompt(post_spec);
    std::vector<SqlCandidate> post = query_ensemble(experts, post_prompt, config.params);
    execute_usable(post, db, exec_opts);

    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : post) cands.push_back(candidate_to_json(c));
    return {{"link", link_to_json(link)},
            {"link_fallback_full_schema", used_full},
            {"prompt", post_prompt},
            {"candidates", cands}};
  }

  void run_s6(const BenchmarkItem& item, const DatabaseSchema&, Database& db, const ExecResult* gold,
              bool order_sensitive, RunRecord& record) {
    const RunRecord* s5_record = nullptr;
    for (const auto& r : store.records()) {
      if (r.stage_id == "s5" && r.item_id == item.item_id) s5_record = &r;
    }
    if (s5_record == nullptr) {
      throw Error(Errc::empty_store, fmt::format("no s5 record for {}", item.item_id));
    }
    const nlohmann::json& chains = s5_record->extra.at("chains");
    if (lineage_digest(chains) != s5_record->extra.at("lineage_id").get<std::string>()) {
      throw Error(Errc::duplicate_key,
                  fmt::format("s5 lineage digest mismatch for {}", item.item_id));
    }
    const char* strategy = config.stage == StageId::s6_wma
                               ? "wma"
                               : (config.stage == StageId::s6_rwma ? "rwma" : "naive");
    const nlohmann::json& chain = chains.at(strategy);
    record.extra["consumed_lineage"] = s5_record->extra.at("lineage_id");
    record.extra["consumed_strategy"] = strategy;

    std::vector<SqlCandidate> cands;
    for (const auto& cj : chain.at("candidates")) cands.push_back(candidate_from_json(cj));
    std::string post_prompt = chain.at("prompt").get<std::string>();

    record.refinements = refine_all(cands, db, post_prompt);
    record.votes = vote_all(cands, order_sensitive);
    record.candidates = cands;
    score_and_update(item, cands, record.votes, gold, order_sensitive);
  }

  std::string finish() {
    const std::string stage = stage_id_name(config.stage);
    store.append_summary(vote_summary_from_state(stage, "wma", wma_state));
    store.append_summary(vote_summary_from_state(stage, "rwma", rwma_state));
    store.append_summary(vote_summary_from_state(stage, "naive", naive_state));

    std::vector<AccuracyRow> rows;
    for (const char* s : {"wma", "rwma", "naive"}) {
      auto [c, t] = strategy_acc[s];
      rows.push_back({s, "strategy", c, t});
    }
    for (Expert* e : experts) {
      auto [c, t] = expert_acc[e->name()];
      rows.push_back({e->name(), "expert", c, t});
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

std::string run_stage(const StageConfig& config, const BenchmarkSet& benchmark,
                      const std::vector<Expert*>& experts, RunStore& store) {
  validate_stage_config(config);
  if (experts.empty()) throw Error(Errc::usage, "at least one expert is required");

  StageRun run(config, benchmark, experts, store);
  for (const auto& item : benchmark.items) {
    RunRecord record;
    try {
      record = run.process_item(item);
    } catch (const std::exception& e) {
      record = RunRecord{};
      record.item_id = item.item_id;
      record.stage_id = stage_id_name(config.stage);
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
