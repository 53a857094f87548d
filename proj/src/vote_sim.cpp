#include "sqlens/vote_sim.hpp"

#include <algorithm>
#include <cmath>

namespace sqlens {

LossMatrix random_loss_matrix(std::mt19937_64& rng, std::size_t rounds, std::size_t n_experts) {
  std::uniform_real_distribution<double> bias(0.05, 0.95);
  std::vector<double> p(n_experts);
  for (auto& b : p) b = bias(rng);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  LossMatrix losses(rounds, std::vector<int>(n_experts, 0));
  for (std::size_t t = 0; t < rounds; ++t) {
    for (std::size_t i = 0; i < n_experts; ++i) {
      losses[t][i] = coin(rng) < p[i] ? 1 : 0;
    }
  }
  return losses;
}

VoteState simulate_wma(const LossMatrix& losses, std::size_t n_experts) {
  VoteState state(n_experts, losses.size());
  for (const auto& round : losses) {
    update_weights(state, round, majority_loss(state, round));
  }
  return state;
}

std::size_t simulate_rwma_once(const LossMatrix& losses, std::size_t n_experts, std::uint64_t seed) {
  VoteState state(n_experts, losses.size());
  std::mt19937_64 rng(seed);
  std::size_t own_mistakes = 0;
  for (const auto& round : losses) {
    std::vector<double> probs = selection_probabilities(state);
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    std::size_t chosen = n_experts - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) {
        chosen = i;
        break;
      }
    }
    int own_loss = round[chosen];
    own_mistakes += static_cast<std::size_t>(own_loss);
    update_weights(state, round, own_loss);
  }
  return own_mistakes;
}

RwmaEstimate simulate_rwma_mean(const LossMatrix& losses, std::size_t n_experts, std::size_t n_seeds,
                                std::uint64_t base_seed) {
  std::vector<double> samples;
  samples.reserve(n_seeds);
  for (std::size_t s = 0; s < n_seeds; ++s) {
    samples.push_back(
        static_cast<double>(simulate_rwma_once(losses, n_experts, base_seed + s)));
  }
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  if (samples.size() > 1) var /= static_cast<double>(samples.size() - 1);

  std::vector<std::size_t> expert_mistakes(n_experts, 0);
  for (const auto& round : losses) {
    for (std::size_t i = 0; i < n_experts; ++i) expert_mistakes[i] += static_cast<std::size_t>(round[i]);
  }
  std::size_t best = expert_mistakes.empty() ? 0 : *std::min_element(expert_mistakes.begin(), expert_mistakes.end());

  return {mean, std::sqrt(var), best, n_seeds};
}

}  // namespace sqlens
