#pragma once

#include <string>

namespace sqlens {

/// Scores how alike two natural-language questions are, higher meaning closer.
/// Implementations must be deterministic: identical inputs give identical
/// scores across runs and platforms.
class SimilarityProvider {
 public:
  virtual ~SimilarityProvider() = default;

  /// Returns a score in [0, 1].
  virtual double score(const std::string& a, const std::string& b) const = 0;
};

/// Cosine similarity over hashed bag-of-words vectors. Tokens are lowercased
/// alphanumeric runs; each token is hashed and counted, and the score is the
/// cosine of the two count vectors. Needs no model files or network access.
class HashedBagOfWords final : public SimilarityProvider {
 public:
  double score(const std::string& a, const std::string& b) const override;
};

}  // namespace sqlens
