#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "sqlens/expert.hpp"

namespace sqlens {

/// Connection settings for one chat-completion backend. The credential is
/// named by environment variable, never stored in the config file.
struct HttpExpertConfig {
  std::string name;
  std::string endpoint;        // scheme://host[:port], path is fixed
  std::string model;
  std::string credential_env;  // may be empty for unauthenticated endpoints
  GenerationParams params;
};

HttpExpertConfig http_config_from_json(const nlohmann::json& j);
/// Reads a JSON array of expert configs from a file. Throws MissingFile or
/// MalformedCatalog.
std::vector<HttpExpertConfig> load_expert_configs(const std::string& path);

/// Expert backed by an OpenAI-style /v1/chat/completions endpoint. Transient
/// failures are retried with exponential backoff; HTTP 401/403 aborts
/// immediately with AuthFailure; anything still failing after the final retry
/// surfaces as Transport.
class HttpChatExpert final : public Expert {
 public:
  explicit HttpChatExpert(HttpExpertConfig config);

  const std::string& name() const override { return config_.name; }
  std::string complete(const std::string& prompt, const GenerationParams& params) override;

  static constexpr std::chrono::seconds kRequestTimeout{120};
  static constexpr int kMaxRetries = 3;

 private:
  HttpExpertConfig config_;
};

}  // namespace sqlens
