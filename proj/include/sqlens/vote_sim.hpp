#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sqlens/vote.hpp"

namespace sqlens {

/// Round-by-round 0/1 losses, losses[t][i] for round t and expert i.
using LossMatrix = std::vector<std::vector<int>>;

/// Random game where expert i errs with a fixed per-expert probability drawn
/// from [0.05, 0.95]. Exercises both strong and weak experts.
LossMatrix random_loss_matrix(std::mt19937_64& rng, std::size_t rounds, std::size_t n_experts);

/// Play the whole matrix with the deterministic weighted-majority learner;
/// the learner errs when at least half the weight backs erring experts.
VoteState simulate_wma(const LossMatrix& losses, std::size_t n_experts);

/// Play the matrix once with the randomized learner seeded as given; returns
/// its mistake count.
std::size_t simulate_rwma_once(const LossMatrix& losses, std::size_t n_experts, std::uint64_t seed);

struct RwmaEstimate {
  double mean_mistakes;
  double stddev;        // sample standard deviation across seeds
  std::size_t best_mistakes;
  std::size_t seeds;
};

/// Monte Carlo estimate of the randomized learner's expected mistakes over
/// consecutive seeds starting at base_seed.
RwmaEstimate simulate_rwma_mean(const LossMatrix& losses, std::size_t n_experts, std::size_t n_seeds,
                                std::uint64_t base_seed);

}  // namespace sqlens
