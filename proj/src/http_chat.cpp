#include "sqlens/http_chat.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <thread>

#include "sqlens/errors.hpp"

namespace sqlens {

HttpExpertConfig http_config_from_json(const nlohmann::json& j) {
  HttpExpertConfig c;
  c.name = j.at("name").get<std::string>();
  c.endpoint = j.at("endpoint").get<std::string>();
  c.model = j.at("model").get<std::string>();
  c.credential_env = j.value("credential_env", std::string{});
  if (j.contains("params")) c.params = params_from_json(j.at("params"));
  return c;
}

std::vector<HttpExpertConfig> load_expert_configs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, fmt::format("cannot read expert config {}", path));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_catalog, fmt::format("expert config {}: {}", path, e.what()));
  }
  if (!j.is_array() || j.empty()) {
    throw Error(Errc::malformed_catalog, fmt::format("expert config {} must be a non-empty array", path));
  }
  std::vector<HttpExpertConfig> out;
  try {
    for (const auto& entry : j) out.push_back(http_config_from_json(entry));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_catalog, fmt::format("expert config {}: {}", path, e.what()));
  }
  return out;
}

HttpChatExpert::HttpChatExpert(HttpExpertConfig config) : config_(std::move(config)) {}

std::string HttpChatExpert::complete(const std::string& prompt, const GenerationParams& params) {
  nlohmann::json body = {{"model", config_.model},
                         {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                         {"temperature", params.temperature},
                         {"top_p", params.top_p},
                         {"max_tokens", params.max_tokens}};
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!config_.credential_env.empty()) {
    const char* key = std::getenv(config_.credential_env.c_str());
    if (key != nullptr && *key != '\0') headers.emplace("Authorization", fmt::format("Bearer {}", key));
  }

  std::string last_error;
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(200) * (1 << (attempt - 1)));
    }
    httplib::Client client(config_.endpoint);
    client.set_connection_timeout(kRequestTimeout);
    client.set_read_timeout(kRequestTimeout);
    client.set_write_timeout(kRequestTimeout);

    auto res = client.Post("/v1/chat/completions", headers, payload, "application/json");
    if (!res) {
      last_error = fmt::format("connection failed: {}", httplib::to_string(res.error()));
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw Error(Errc::auth_failure,
                  fmt::format("{} rejected credentials with HTTP {}", config_.endpoint, res->status));
    }
    if (res->status != 200) {
      last_error = fmt::format("HTTP {}", res->status);
      continue;
    }
    try {
      nlohmann::json reply = nlohmann::json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      last_error = fmt::format("malformed completion body: {}", e.what());
    }
  }
  throw Error(Errc::transport,
              fmt::format("{} failed after {} attempts: {}", config_.endpoint, kMaxRetries + 1, last_error));
}

}  // namespace sqlens
