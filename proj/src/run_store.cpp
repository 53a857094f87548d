#include "sqlens/run_store.hpp"

#include <fmt/format.h>

#include <fstream>

#include "sqlens/errors.hpp"
#include "sqlens/strings.hpp"

namespace sqlens {

nlohmann::json run_record_to_json(const RunRecord& r) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : r.candidates) cands.push_back(candidate_to_json(c));
  return {{"type", "record"},
          {"item_id", r.item_id},
          {"stage_id", r.stage_id},
          {"candidates", cands},
          {"votes", r.votes},
          {"refinements", r.refinements},
          {"extra", r.extra},
          {"timestamp", r.timestamp}};
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.item_id = j.at("item_id").get<std::string>();
  r.stage_id = j.at("stage_id").get<std::string>();
  for (const auto& c : j.at("candidates")) r.candidates.push_back(candidate_from_json(c));
  r.votes = j.at("votes");
  r.refinements = j.at("refinements");
  r.extra = j.at("extra");
  r.timestamp = j.at("timestamp").get<std::string>();
  return r;
}

VoteSummary vote_summary_from_state(const std::string& stage_id, const std::string& strategy,
                                    const VoteState& state) {
  VoteSummary s;
  s.stage_id = stage_id;
  s.strategy = strategy;
  s.n_experts = state.n_experts;
  s.epsilon = state.epsilon;
  s.weight_trajectory = state.weight_trajectory;
  s.algorithm_history = state.algorithm_history;
  s.best_history = state.best_history;
  return s;
}

namespace {

nlohmann::json summary_to_json(const VoteSummary& s) {
  return {{"type", "summary"},
          {"stage_id", s.stage_id},
          {"strategy", s.strategy},
          {"n_experts", s.n_experts},
          {"epsilon", s.epsilon},
          {"weight_trajectory", s.weight_trajectory},
          {"algorithm_history", s.algorithm_history},
          {"best_history", s.best_history}};
}

VoteSummary summary_from_json(const nlohmann::json& j) {
  VoteSummary s;
  s.stage_id = j.at("stage_id").get<std::string>();
  s.strategy = j.at("strategy").get<std::string>();
  s.n_experts = j.at("n_experts").get<std::size_t>();
  s.epsilon = j.at("epsilon").get<double>();
  s.weight_trajectory = j.at("weight_trajectory").get<std::vector<std::vector<double>>>();
  s.algorithm_history = j.at("algorithm_history").get<std::vector<std::size_t>>();
  s.best_history = j.at("best_history").get<std::vector<std::size_t>>();
  return s;
}

nlohmann::json accuracy_to_json(const std::string& stage_id, const std::vector<AccuracyRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"name", r.name}, {"kind", r.kind}, {"correct", r.correct}, {"total", r.total}});
  }
  return {{"type", "accuracy"}, {"stage_id", stage_id}, {"rows", out}};
}

}  // namespace

RunStore RunStore::open(const std::filesystem::path& path) {
  RunStore store;
  store.path_ = path;
  std::ifstream in(path);
  if (in) {
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line);
      std::string type = j.at("type").get<std::string>();
      if (type == "record") {
        RunRecord r = run_record_from_json(j);
        store.record_keys_.insert({r.item_id, r.stage_id});
        store.records_.push_back(std::move(r));
      } else if (type == "summary") {
        VoteSummary s = summary_from_json(j);
        store.summary_keys_.insert({s.stage_id, s.strategy});
        store.summaries_.push_back(std::move(s));
      } else if (type == "accuracy") {
        std::vector<AccuracyRow> rows;
        for (const auto& r : j.at("rows")) {
          rows.push_back({r.at("name").get<std::string>(), r.at("kind").get<std::string>(),
                          r.at("correct").get<std::size_t>(), r.at("total").get<std::size_t>()});
        }
        store.accuracy_.emplace_back(j.at("stage_id").get<std::string>(), std::move(rows));
      }
    }
  }
  return store;
}

void RunStore::write_line(const nlohmann::json& j) {
  std::ofstream out(path_, std::ios::app);
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw Error(Errc::storage_full, fmt::format("append to {} failed", path_.string()));
}

void RunStore::append(const RunRecord& record) {
  auto key = std::make_pair(record.item_id, record.stage_id);
  if (!record_keys_.insert(key).second) {
    throw Error(Errc::duplicate_key,
                fmt::format("record for ({}, {}) already stored", record.item_id, record.stage_id));
  }
  write_line(run_record_to_json(record));
  records_.push_back(record);
}

void RunStore::append_summary(const VoteSummary& summary) {
  auto key = std::make_pair(summary.stage_id, summary.strategy);
  if (!summary_keys_.insert(key).second) {
    throw Error(Errc::duplicate_key,
                fmt::format("summary for ({}, {}) already stored", summary.stage_id, summary.strategy));
  }
  write_line(summary_to_json(summary));
  summaries_.push_back(summary);
}

void RunStore::append_accuracy(const std::string& stage_id, const std::vector<AccuracyRow>& rows) {
  write_line(accuracy_to_json(stage_id, rows));
  accuracy_.emplace_back(stage_id, rows);
}

std::vector<AccuracyRow> RunStore::accuracy_for(const std::string& stage_id) const {
  for (auto it = accuracy_.rbegin(); it != accuracy_.rend(); ++it) {
    if (it->first == stage_id) return it->second;
  }
  return {};
}

std::string export_report(const RunStore& store, ReportKind kind) {
  std::string out;
  switch (kind) {
    case ReportKind::accuracy_table: {
      // Latest table per stage, stages in sorted order.
      std::vector<AccuracyRow> rows;
      std::set<std::string> stages;
      for (const auto& [stage, table] : store.accuracy_tables()) stages.insert(stage);
      for (const auto& stage : stages) {
        for (const auto& row : store.accuracy_for(stage)) rows.push_back(row);
      }
      if (rows.empty()) throw Error(Errc::empty_store, "no accuracy tables stored");
      out = "name,kind,correct,total,accuracy\n";
      for (const auto& r : rows) {
        double acc = r.total == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.total);
        out += fmt::format("{},{},{},{},{:.4f}\n", csv_escape(r.name), csv_escape(r.kind), r.correct,
                           r.total, acc);
      }
      return out;
    }
    case ReportKind::weight_trajectory: {
      const VoteSummary* chosen = nullptr;
      for (const auto& s : store.summaries()) {
        if (!s.weight_trajectory.empty()) chosen = &s;
      }
      if (chosen == nullptr) throw Error(Errc::empty_store, "no vote summaries stored");
      out = "round";
      for (std::size_t i = 1; i <= chosen->n_experts; ++i) out += fmt::format(",expert_{}", i);
      out += '\n';
      for (std::size_t t = 0; t < chosen->weight_trajectory.size(); ++t) {
        out += fmt::format("{}", t + 1);
        for (double w : chosen->weight_trajectory[t]) out += fmt::format(",{:.12g}", w);
        out += '\n';
      }
      return out;
    }
    case ReportKind::regret_series: {
      bool any = false;
      out = "round,algorithm,mistakes,best_expert_mistakes,avg_regret\n";
      for (const auto& s : store.summaries()) {
        for (std::size_t t = 0; t < s.algorithm_history.size(); ++t) {
          double regret = static_cast<double>(s.algorithm_history[t]) -
                          static_cast<double>(s.best_history[t]);
          out += fmt::format("{},{},{},{},{:.6f}\n", t + 1, s.strategy, s.algorithm_history[t],
                             s.best_history[t], regret / static_cast<double>(t + 1));
          any = true;
        }
      }
      if (!any) throw Error(Errc::empty_store, "no vote summaries stored");
      return out;
    }
  }
  throw Error(Errc::usage, "unknown report kind");
}

}  // namespace sqlens
