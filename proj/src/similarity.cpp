#include "sqlens/similarity.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <unordered_map>

namespace sqlens {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::unordered_map<std::uint64_t, double> bag(const std::string& text) {
  std::unordered_map<std::uint64_t, double> counts;
  std::string token;
  auto flush = [&] {
    if (!token.empty()) {
      counts[fnv1a(token)] += 1.0;
      token.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return counts;
}

}  // namespace

double HashedBagOfWords::score(const std::string& a, const std::string& b) const {
  auto va = bag(a);
  auto vb = bag(b);
  if (va.empty() || vb.empty()) return 0.0;
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (const auto& [k, v] : va) {
    na += v * v;
    auto it = vb.find(k);
    if (it != vb.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : vb) nb += v * v;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace sqlens
