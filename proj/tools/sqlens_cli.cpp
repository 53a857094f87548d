#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sqlens/benchmark.hpp"
#include "sqlens/errors.hpp"
#include "sqlens/http_chat.hpp"
#include "sqlens/run_store.hpp"
#include "sqlens/settings.hpp"
#include "sqlens/stages.hpp"
#include "sqlens/vote_sim.hpp"

namespace {

using namespace sqlens;

BenchmarkFormat parse_format(const std::string& name) {
  if (name == "spider") return BenchmarkFormat::spider;
  if (name == "bird") return BenchmarkFormat::bird;
  throw Error(Errc::usage, fmt::format("unknown benchmark format {}", name));
}

GroupKeying parse_grouping(const std::string& name) {
  if (name == "fingerprint") return GroupKeying::fingerprint;
  if (name == "text") return GroupKeying::text;
  throw Error(Errc::usage, fmt::format("unknown vote grouping {}", name));
}

LossMode parse_loss(const std::string& name) {
  if (name == "supervised") return LossMode::supervised;
  if (name == "unsupervised") return LossMode::unsupervised;
  throw Error(Errc::usage, fmt::format("unknown loss mode {}", name));
}

/// Owns whichever expert roster the transcript flags select: replayed,
/// recorded live, or plain live.
struct Roster {
  std::vector<std::unique_ptr<Expert>> owned;
  std::vector<Expert*> experts;
  std::shared_ptr<Transcript> recording;
  std::string record_path;

  void save() const {
    if (recording && !record_path.empty()) recording->save(record_path);
  }
};

Roster build_roster(const std::string& config_path, const std::string& replay_path,
                    const std::string& record_path) {
  Roster roster;
  auto configs = load_expert_configs(config_path);
  if (!replay_path.empty()) {
    auto transcript = Transcript::load(replay_path);
    for (const auto& c : configs) {
      roster.owned.push_back(std::make_unique<ReplayExpert>(c.name, transcript));
    }
  } else if (!record_path.empty()) {
    roster.recording = std::make_shared<Transcript>();
    roster.record_path = record_path;
    for (const auto& c : configs) {
      roster.owned.push_back(
          std::make_unique<RecordingExpert>(std::make_unique<HttpChatExpert>(c), roster.recording));
    }
  } else {
    for (const auto& c : configs) roster.owned.push_back(std::make_unique<HttpChatExpert>(c));
  }
  for (auto& e : roster.owned) roster.experts.push_back(e.get());
  return roster;
}

CloudReplay load_cloud_replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, fmt::format("cannot read recorded executions {}", path));
  nlohmann::json j;
  in >> j;
  CloudReplay replay;
  for (const auto& [digest, result] : j.items()) {
    replay[digest] = exec_result_from_json(result);
  }
  return replay;
}

void write_or_print(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::ofstream out(out_path, std::ios::trunc | std::ios::binary);
  out << text;
  if (!out) throw Error(Errc::storage_full, fmt::format("cannot write {}", out_path));
}

int cmd_load(const std::string& benchmark_dir, const std::string& format) {
  BenchmarkSet bm = load_benchmark(benchmark_dir, parse_format(format));
  std::map<std::string, std::size_t> by_difficulty;
  for (const auto& item : bm.items) ++by_difficulty[difficulty_name(item.difficulty)];
  fmt::print("items: {}\ndatabases: {}\n", bm.items.size(), bm.catalog.size());
  for (const auto& [name, count] : by_difficulty) fmt::print("{}: {}\n", name, count);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble text-to-SQL pipelines over live or recorded experts"};
  app.require_subcommand(1);

  std::string benchmark_dir;
  std::string format = "spider";
  std::string experts_path;
  std::string store_path;
  std::string replay_path;
  std::string record_path;
  std::uint64_t seed = 0;
  double timeout_s = 30.0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--benchmark", benchmark_dir, "Benchmark directory")->required();
    cmd->add_option("--format", format, "Benchmark layout: spider or bird");
    cmd->add_option("--experts", experts_path, "Expert roster JSON")->required();
    cmd->add_option("--store", store_path, "Run store JSONL path")->required();
    cmd->add_option("--seed", seed, "Random seed");
    cmd->add_option("--timeout", timeout_s, "Per-query timeout in seconds");
    auto* rep = cmd->add_option("--replay", replay_path, "Serve completions from this transcript");
    auto* rec = cmd->add_option("--record", record_path, "Record completions to this transcript");
    rep->excludes(rec);
    rec->excludes(rep);
  };

  // load
  auto* load_cmd = app.add_subcommand("load", "Parse a benchmark and print its composition");
  std::string load_dir;
  std::string load_format = "spider";
  load_cmd->add_option("--benchmark", load_dir, "Benchmark directory")->required();
  load_cmd->add_option("--format", load_format, "Benchmark layout: spider or bird");

  // run-stage
  auto* stage_cmd = app.add_subcommand("run-stage", "Run one pipeline stage over a benchmark");
  std::string stage_name;
  std::size_t k_few_shot = 9;
  int refine_cap = 0;
  std::string vote_group = "fingerprint";
  std::string loss_mode = "supervised";
  add_common(stage_cmd);
  stage_cmd->add_option("--stage", stage_name, "s1 s2 s3 s4 s5 s6_wma s6_rwma s6_naive")->required();
  stage_cmd->add_option("--k", k_few_shot, "Few-shot demonstrations per prompt");
  stage_cmd->add_option("--refine-cap", refine_cap, "Execution cap per refinement (0 = default)");
  stage_cmd->add_option("--vote-group", vote_group, "Candidate grouping: fingerprint or text");
  stage_cmd->add_option("--loss", loss_mode, "Loss mode: supervised or unsupervised");

  // run-setting
  auto* setting_cmd = app.add_subcommand("run-setting", "Run one agent setting over a benchmark");
  int setting = 1;
  std::string dialect_name_arg = "sqlite";
  std::string env_root;
  std::string out_root;
  std::string knowledge_dir;
  std::string syntax_dir;
  std::string cloud_replay_path;
  add_common(setting_cmd);
  setting_cmd->add_option("--setting", setting, "Setting number 1-6")->required();
  setting_cmd->add_option("--dialect", dialect_name_arg, "sqlite, bigquery, or snowflake");
  setting_cmd->add_option("--env-root", env_root, "Exploration sandbox root");
  setting_cmd->add_option("--out-root", out_root, "Episode artifact root");
  setting_cmd->add_option("--knowledge-dir", knowledge_dir, "External knowledge corpus");
  setting_cmd->add_option("--syntax-dir", syntax_dir, "Dialect syntax corpus");
  setting_cmd->add_option("--cloud-replay", cloud_replay_path,
                          "Recorded executions (JSON, keyed by SQL digest) for cloud dialects");
  setting_cmd->add_option("--vote-group", vote_group, "Candidate grouping: fingerprint or text");
  setting_cmd->add_option("--loss", loss_mode, "Loss mode: supervised or unsupervised");

  // report
  auto* report_cmd = app.add_subcommand("report", "Render a CSV report from a run store");
  std::string report_store;
  std::string report_kind = "accuracy";
  std::string report_out;
  report_cmd->add_option("--store", report_store, "Run store JSONL path")->required();
  report_cmd->add_option("--kind", report_kind, "accuracy, trajectory, or regret");
  report_cmd->add_option("--out", report_out, "Output path (default stdout)");

  // simulate-bounds
  auto* sim_cmd = app.add_subcommand("simulate-bounds", "Check mistake bounds on random loss games");
  std::size_t sim_n = 4;
  std::size_t sim_rounds = 200;
  std::size_t sim_games = 100;
  std::size_t sim_seeds = 100;
  std::uint64_t sim_seed = 0;
  sim_cmd->add_option("--n", sim_n, "Number of experts");
  sim_cmd->add_option("--rounds", sim_rounds, "Rounds per game");
  sim_cmd->add_option("--games", sim_games, "Number of random games");
  sim_cmd->add_option("--seeds", sim_seeds, "Monte Carlo seeds per game for the randomized learner");
  sim_cmd->add_option("--seed", sim_seed, "Base seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (load_cmd->parsed()) return cmd_load(load_dir, load_format);

    if (stage_cmd->parsed()) {
      BenchmarkSet bm = load_benchmark(benchmark_dir, parse_format(format));
      Roster roster = build_roster(experts_path, replay_path, record_path);
      RunStore store = RunStore::open(store_path);
      StageConfig cfg;
      cfg.stage = stage_id_from_name(stage_name);
      cfg.k_few_shot = k_few_shot;
      cfg.refine_cap = refine_cap;
      cfg.grouping = parse_grouping(vote_group);
      cfg.loss = parse_loss(loss_mode);
      cfg.seed = seed;
      cfg.exec_timeout =
          std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000.0));
      std::string run_id = run_stage(cfg, bm, roster.experts, store);
      roster.save();
      fmt::print("{}\n", run_id);
      return 0;
    }

    if (setting_cmd->parsed()) {
      BenchmarkSet bm = load_benchmark(benchmark_dir, parse_format(format));
      Roster roster = build_roster(experts_path, replay_path, record_path);
      RunStore store = RunStore::open(store_path);
      CloudReplay cloud;
      SettingConfig cfg;
      cfg.setting = setting;
      cfg.dialect = dialect_from_name(dialect_name_arg);
      cfg.seed = seed;
      cfg.grouping = parse_grouping(vote_group);
      cfg.loss = parse_loss(loss_mode);
      cfg.env_root = env_root;
      cfg.out_root = out_root;
      cfg.knowledge_dir = knowledge_dir;
      cfg.syntax_dir = syntax_dir;
      cfg.exec.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000.0));
      if (!cloud_replay_path.empty()) {
        cloud = load_cloud_replay(cloud_replay_path);
        cfg.cloud_replay = &cloud;
      }
      std::string run_id = run_setting(cfg, bm, roster.experts, store);
      roster.save();
      fmt::print("{}\n", run_id);
      return 0;
    }

    if (report_cmd->parsed()) {
      RunStore store = RunStore::open(report_store);
      ReportKind kind;
      if (report_kind == "accuracy") {
        kind = ReportKind::accuracy_table;
      } else if (report_kind == "trajectory") {
        kind = ReportKind::weight_trajectory;
      } else if (report_kind == "regret") {
        kind = ReportKind::regret_series;
      } else {
        throw Error(Errc::usage, fmt::format("unknown report kind {}", report_kind));
      }
      write_or_print(export_report(store, kind), report_out);
      return 0;
    }

    if (sim_cmd->parsed()) {
      std::mt19937_64 rng(sim_seed);
      std::size_t wma_tight_violations = 0;
      std::size_t wma_relaxed_violations = 0;
      std::size_t rwma_violations = 0;
      double worst_wma_margin = 0.0;
      for (std::size_t g = 0; g < sim_games; ++g) {
        LossMatrix losses = random_loss_matrix(rng, sim_rounds, sim_n);
        VoteState state = simulate_wma(losses, sim_n);
        BoundReport wma = wma_bound_report(state);
        if (!wma.tight_ok) ++wma_tight_violations;
        if (!wma.relaxed_ok) ++wma_relaxed_violations;
        worst_wma_margin = std::max(worst_wma_margin, wma.algorithm_mistakes - wma.tight_rhs);

        RwmaEstimate est = simulate_rwma_mean(losses, sim_n, sim_seeds, sim_seed + g);
        double slack = 3.0 * est.stddev / std::sqrt(static_cast<double>(est.seeds));
        BoundReport rwma =
            rwma_bound_report(est.mean_mistakes, est.best_mistakes, sim_n, sim_rounds, slack);
        if (!rwma.tight_ok) ++rwma_violations;
      }
      fmt::print("games: {}\nexperts: {}\nrounds: {}\n", sim_games, sim_n, sim_rounds);
      fmt::print("wma tight violations: {}\nwma relaxed violations: {}\n", wma_tight_violations,
                 wma_relaxed_violations);
      fmt::print("rwma mean-bound violations (3 sigma slack): {}\n", rwma_violations);
      return wma_tight_violations + wma_relaxed_violations + rwma_violations == 0 ? 0 : 1;
    }
  } catch (const Error& e) {
    fmt::print(stderr, "{}\n", e.what());
    return e.code() == Errc::usage ? 2 : 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "{}\n", e.what());
    return 1;
  }
  return 0;
}
