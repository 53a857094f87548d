#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sqlens/candidate.hpp"
#include "sqlens/exec.hpp"
#include "sqlens/vendor_json.hpp"

namespace sqlens {

enum class VoteStrategy { wma, rwma, naive };
enum class GroupKeying { fingerprint, text };
enum class LossMode { supervised, unsupervised };

const char* vote_strategy_name(VoteStrategy s);

/// Learning rate for multiplicative weights: sqrt(ln(n)/horizon) clamped to
/// [1e-6, 0.5].
double epsilon_for(std::size_t n_experts, std::size_t horizon);

/// Online state of one weighted-majority learner. Weights decay by (1 - eps)
/// per mistake, so with a fixed eps the identity w_i == (1 - eps)^m_i holds
/// to rounding error. When rounds pass the assumed horizon the horizon
/// doubles and eps is recomputed (streaming mode); the identity then holds
/// only within each horizon epoch.
struct VoteState {
  VoteState(std::size_t n_experts, std::size_t horizon);

  std::size_t n_experts;
  std::size_t horizon;
  double epsilon;
  std::vector<double> weights;        // w_i, all start at 1
  std::vector<std::size_t> mistakes;  // m_i
  std::size_t algorithm_mistakes = 0;  // M_t
  std::size_t rounds = 0;              // t

  std::vector<std::vector<double>> weight_trajectory;   // snapshot after each round
  std::vector<std::size_t> algorithm_history;           // M_t per round
  std::vector<std::size_t> best_history;                // min_i m_i per round

  std::size_t best_mistakes() const;  // M* = min_i m_i
};

/// One candidate group: every member produced an equivalent answer.
struct CandidateGroup {
  std::string key;
  std::vector<std::size_t> members;  // candidate indices, ascending
};

/// Partition candidates into equivalence groups. Under fingerprint keying,
/// candidates whose SQL executed cleanly group by result fingerprint and
/// erroring SQL groups by normalized text; under text keying everything
/// groups by normalized text. Failed slots (no SQL) form singletons, so every
/// candidate lands in exactly one group.
std::vector<CandidateGroup> group_candidates(const std::vector<SqlCandidate>& candidates,
                                             GroupKeying keying, bool order_sensitive);

struct VoteDecision {
  VoteStrategy strategy;
  std::string key;                 // winning group key
  std::size_t candidate_index;     // representative: lowest index in the group
  double group_weight;             // W(s) of the winning group
  std::optional<std::size_t> sampled_expert;  // rwma only
  std::vector<std::pair<std::string, double>> tallies;  // per-group weight, key order
};

nlohmann::json decision_to_json(const VoteDecision& d);

/// Deterministic weighted vote: the group with the largest summed weight
/// wins; ties go to the group with the lowest member index, then the
/// lexicographically smallest key.
VoteDecision select_wma(const VoteState& state, const std::vector<CandidateGroup>& groups);

/// Randomized vote: one expert is sampled with probability proportional to
/// its weight and its group wins.
VoteDecision select_rwma(const VoteState& state, const std::vector<CandidateGroup>& groups,
                         std::mt19937_64& rng);

/// Unweighted majority: the largest group wins, same tie-breaks as WMA.
/// Identical to select_wma under all-ones weights.
VoteDecision select_naive(const std::vector<CandidateGroup>& groups);

/// Normalized selection distribution p_i = w_i / sum_j w_j.
std::vector<double> selection_probabilities(const VoteState& state);

/// Per-expert 0/1 losses for one round. Supervised mode scores against the
/// gold execution (throws MissingGold when absent); unsupervised mode charges
/// a loss whenever the candidate's execution erred or returned no rows.
std::vector<int> loss_vector(const std::vector<SqlCandidate>& candidates, const ExecResult* gold,
                             LossMode mode, bool order_sensitive);

/// The weighted-majority learner's own loss for this round: 1 when at least
/// half the total weight sits on erring experts.
int majority_loss(const VoteState& state, const std::vector<int>& losses);

/// Apply one round: erring experts are scaled by (1 - eps), histories are
/// extended, and the horizon doubles if the round count passes it.
void update_weights(VoteState& state, const std::vector<int>& losses, int algorithm_loss);

/// Mistake-bound check for a finished run. The tight form uses the state's
/// eps; the relaxed form only depends on horizon and expert count.
struct BoundReport {
  double algorithm_mistakes;  // observed M_T (a mean for Monte Carlo checks)
  double best_mistakes;       // M*
  double tight_rhs;
  double relaxed_rhs;
  bool tight_ok;
  bool relaxed_ok;
};

/// WMA: tight M_T <= (2 + eps) M* + 2 ln(n)/eps; relaxed M_T <= 2 M* +
/// 4 sqrt(T ln n).
BoundReport wma_bound_report(const VoteState& state);

/// RWMA: tight E[M_T] <= (1 + eps) M* + ln(n)/eps; relaxed E[M_T] <= M* +
/// 2 sqrt(T ln n). mean_mistakes is the Monte Carlo estimate of E[M_T];
/// slack widens the tight check by the caller's confidence margin.
BoundReport rwma_bound_report(double mean_mistakes, std::size_t best_mistakes, std::size_t n_experts,
                              std::size_t horizon, double slack);

struct RegretRow {
  std::size_t round;        // 1-based
  double error_rate;        // M_t / t
  double regret;            // M_t - M*_t
  double avg_regret;        // regret / t
};

/// Per-round regret series recomputed from the state's histories.
std::vector<RegretRow> regret_series(const VoteState& state);

}  // namespace sqlens
