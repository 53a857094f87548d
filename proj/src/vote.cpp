#include "sqlens/vote.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "sqlens/errors.hpp"
#include "sqlens/strings.hpp"

namespace sqlens {

const char* vote_strategy_name(VoteStrategy s) {
  switch (s) {
    case VoteStrategy::wma: return "wma";
    case VoteStrategy::rwma: return "rwma";
    case VoteStrategy::naive: return "naive";
  }
  return "wma";
}

double epsilon_for(std::size_t n_experts, std::size_t horizon) {
  double raw = std::sqrt(std::log(static_cast<double>(n_experts)) / static_cast<double>(horizon));
  return std::clamp(raw, 1e-6, 0.5);
}

VoteState::VoteState(std::size_t n, std::size_t horizon_)
    : n_experts(n),
      horizon(horizon_),
      epsilon(epsilon_for(n, horizon_)),
      weights(n, 1.0),
      mistakes(n, 0) {}

std::size_t VoteState::best_mistakes() const {
  return *std::min_element(mistakes.begin(), mistakes.end());
}

std::vector<CandidateGroup> group_candidates(const std::vector<SqlCandidate>& candidates,
                                             GroupKeying keying, bool order_sensitive) {
  std::map<std::string, CandidateGroup> by_key;
  std::vector<std::string> key_order;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const SqlCandidate& c = candidates[i];
    std::string key;
    if (!c.usable()) {
      key = fmt::format("nosql:{}", i);
    } else if (keying == GroupKeying::fingerprint && c.executed && c.execution.ok_rows()) {
      key = fmt::format("fp:{}", fingerprint(c.execution, order_sensitive));
    } else {
      key = fmt::format("text:{}", normalize_sql_text(c.sql));
    }
    auto [it, inserted] = by_key.try_emplace(key);
    if (inserted) {
      it->second.key = key;
      key_order.push_back(key);
    }
    it->second.members.push_back(i);
  }
  std::vector<CandidateGroup> out;
  out.reserve(key_order.size());
  for (const auto& key : key_order) out.push_back(std::move(by_key[key]));
  return out;
}

namespace {

VoteDecision pick_heaviest(VoteStrategy strategy, const std::vector<CandidateGroup>& groups,
                           const std::vector<double>& weights) {
  VoteDecision d;
  d.strategy = strategy;
  const CandidateGroup* best = nullptr;
  double best_weight = -1.0;
  for (const auto& g : groups) {
    double w = 0.0;
    for (std::size_t m : g.members) w += weights[m];
    d.tallies.emplace_back(g.key, w);
    bool better = false;
    if (w > best_weight) {
      better = true;
    } else if (w == best_weight && best != nullptr) {
      if (g.members.front() != best->members.front()) {
        better = g.members.front() < best->members.front();
      } else {
        better = g.key < best->key;
      }
    }
    if (better) {
      best = &g;
      best_weight = w;
    }
  }
  d.key = best->key;
  d.candidate_index = best->members.front();
  d.group_weight = best_weight;
  return d;
}

}  // namespace

VoteDecision select_wma(const VoteState& state, const std::vector<CandidateGroup>& groups) {
  return pick_heaviest(VoteStrategy::wma, groups, state.weights);
}

VoteDecision select_naive(const std::vector<CandidateGroup>& groups) {
  std::size_t n = 0;
  for (const auto& g : groups) n = std::max(n, g.members.back() + 1);
  VoteDecision d = pick_heaviest(VoteStrategy::naive, groups, std::vector<double>(n, 1.0));
  d.strategy = VoteStrategy::naive;
  return d;
}

VoteDecision select_rwma(const VoteState& state, const std::vector<CandidateGroup>& groups,
                         std::mt19937_64& rng) {
  std::vector<double> probs = selection_probabilities(state);
  // 53-bit uniform in [0, 1); inverse CDF over expert indices.
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  std::size_t chosen = state.n_experts - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) {
      chosen = i;
      break;
    }
  }
  VoteDecision d;
  d.strategy = VoteStrategy::rwma;
  d.sampled_expert = chosen;
  for (const auto& g : groups) {
    double w = 0.0;
    for (std::size_t m : g.members) w += state.weights[m];
    d.tallies.emplace_back(g.key, w);
    if (std::find(g.members.begin(), g.members.end(), chosen) != g.members.end()) {
      d.key = g.key;
      d.candidate_index = g.members.front();
      d.group_weight = w;
    }
  }
  return d;
}

std::vector<double> selection_probabilities(const VoteState& state) {
  double total = 0.0;
  for (double w : state.weights) total += w;
  std::vector<double> probs(state.weights.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = state.weights[i] / total;
  return probs;
}

std::vector<int> loss_vector(const std::vector<SqlCandidate>& candidates, const ExecResult* gold,
                             LossMode mode, bool order_sensitive) {
  if (mode == LossMode::supervised && gold == nullptr) {
    throw Error(Errc::missing_gold, "supervised losses need a gold execution");
  }
  std::vector<int> losses(candidates.size(), 1);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const SqlCandidate& c = candidates[i];
    if (!c.usable() || !c.executed) continue;
    if (mode == LossMode::supervised) {
      losses[i] = execution_match(c.execution, *gold, order_sensitive) ? 0 : 1;
    } else {
      losses[i] = c.execution.failed_or_empty() ? 1 : 0;
    }
  }
  return losses;
}

int majority_loss(const VoteState& state, const std::vector<int>& losses) {
  double wrong = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    total += state.weights[i];
    if (losses[i] != 0) wrong += state.weights[i];
  }
  return wrong * 2.0 >= total ? 1 : 0;
}

void update_weights(VoteState& state, const std::vector<int>& losses, int algorithm_loss) {
  if (losses.size() != state.n_experts) {
    throw Error(Errc::usage, fmt::format("loss vector has {} entries for {} experts", losses.size(),
                                         state.n_experts));
  }
  if (state.rounds >= state.horizon) {
    // Streaming mode: this round passes the assumed horizon, so double it
    // and relearn the rate. Runs that stop at the horizon keep one epsilon.
    state.horizon *= 2;
    state.epsilon = epsilon_for(state.n_experts, state.horizon);
  }
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] != 0) {
      state.weights[i] *= 1.0 - state.epsilon;
      ++state.mistakes[i];
    }
  }
  if (algorithm_loss != 0) ++state.algorithm_mistakes;
  ++state.rounds;
  state.weight_trajectory.push_back(state.weights);
  state.algorithm_history.push_back(state.algorithm_mistakes);
  state.best_history.push_back(state.best_mistakes());
}

BoundReport wma_bound_report(const VoteState& state) {
  BoundReport r;
  r.algorithm_mistakes = static_cast<double>(state.algorithm_mistakes);
  r.best_mistakes = static_cast<double>(state.best_mistakes());
  double n = static_cast<double>(state.n_experts);
  double t = static_cast<double>(state.rounds);
  r.tight_rhs = (2.0 + state.epsilon) * r.best_mistakes + 2.0 * std::log(n) / state.epsilon;
  r.relaxed_rhs = 2.0 * r.best_mistakes + 4.0 * std::sqrt(t * std::log(n));
  r.tight_ok = r.algorithm_mistakes <= r.tight_rhs;
  r.relaxed_ok = r.algorithm_mistakes <= r.relaxed_rhs;
  return r;
}

BoundReport rwma_bound_report(double mean_mistakes, std::size_t best_mistakes, std::size_t n_experts,
                              std::size_t horizon, double slack) {
  BoundReport r;
  r.algorithm_mistakes = mean_mistakes;
  r.best_mistakes = static_cast<double>(best_mistakes);
  double eps = epsilon_for(n_experts, horizon);
  double n = static_cast<double>(n_experts);
  double t = static_cast<double>(horizon);
  r.tight_rhs = (1.0 + eps) * r.best_mistakes + std::log(n) / eps;
  r.relaxed_rhs = r.best_mistakes + 2.0 * std::sqrt(t * std::log(n));
  r.tight_ok = mean_mistakes <= r.tight_rhs + slack;
  r.relaxed_ok = mean_mistakes <= r.relaxed_rhs + slack;
  return r;
}

std::vector<RegretRow> regret_series(const VoteState& state) {
  std::vector<RegretRow> out;
  out.reserve(state.rounds);
  for (std::size_t t = 0; t < state.rounds; ++t) {
    RegretRow row;
    row.round = t + 1;
    double mt = static_cast<double>(state.algorithm_history[t]);
    double best = static_cast<double>(state.best_history[t]);
    row.error_rate = mt / row.round;
    row.regret = mt - best;
    row.avg_regret = row.regret / row.round;
    out.push_back(row);
  }
  return out;
}

nlohmann::json decision_to_json(const VoteDecision& d) {
  nlohmann::json tallies = nlohmann::json::array();
  for (const auto& [key, weight] : d.tallies) tallies.push_back({{"key", key}, {"weight", weight}});
  nlohmann::json j = {{"strategy", vote_strategy_name(d.strategy)},
                      {"key", d.key},
                      {"candidate_index", d.candidate_index},
                      {"group_weight", d.group_weight},
                      {"tallies", tallies}};
  if (d.sampled_expert) j["sampled_expert"] = *d.sampled_expert;
  return j;
}

}  // namespace sqlens
