#include "sqlens/expert.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cstring>
#include <fstream>
#include <memory>

#include "sqlens/errors.hpp"
#include "sqlens/hash.hpp"
#include "sqlens/strings.hpp"

namespace sqlens {

nlohmann::json params_to_json(const GenerationParams& p) {
  return {{"max_tokens", p.max_tokens}, {"temperature", p.temperature}, {"top_p", p.top_p}};
}

GenerationParams params_from_json(const nlohmann::json& j) {
  GenerationParams p;
  p.max_tokens = j.at("max_tokens").get<int>();
  p.temperature = j.at("temperature").get<double>();
  p.top_p = j.at("top_p").get<double>();
  return p;
}

std::string prompt_fingerprint(const std::string& prompt, const GenerationParams& params) {
  return sha256_hex(prompt + '\x1f' + params_to_json(params).dump());
}

std::unique_ptr<ScriptedExpert> ScriptedExpert::constant(std::string name, std::string text) {
  return std::make_unique<ScriptedExpert>(
      std::move(name), [text = std::move(text)](const std::string&, const GenerationParams&) { return text; });
}

std::unique_ptr<ScriptedExpert> ScriptedExpert::sequence(std::string name, std::vector<std::string> responses) {
  auto state = std::make_shared<std::pair<std::vector<std::string>, std::size_t>>(std::move(responses), 0);
  return std::make_unique<ScriptedExpert>(std::move(name),
                                          [state](const std::string&, const GenerationParams&) {
                                            if (state->second >= state->first.size()) {
                                              throw Error(Errc::transport, "scripted response sequence exhausted");
                                            }
                                            return state->first[state->second++];
                                          });
}

std::unique_ptr<ScriptedExpert> ScriptedExpert::failing(std::string name, std::string message) {
  return std::make_unique<ScriptedExpert>(
      std::move(name), [message = std::move(message)](const std::string&, const GenerationParams&) -> std::string {
        throw Error(Errc::transport, message);
      });
}

void Transcript::add(const std::string& expert, const std::string& prompt_hash, const std::string& response_text,
                     const GenerationParams& params) {
  records_.push_back({expert, prompt_hash, response_text, params_to_json(params)});
  slots_[{expert, prompt_hash}].responses.push_back(response_text);
  ++size_;
}

const std::string& Transcript::next_response(const std::string& expert, const std::string& prompt_hash) {
  auto it = slots_.find({expert, prompt_hash});
  if (it == slots_.end()) {
    throw Error(Errc::transcript_miss, fmt::format("no recorded response for {} / {}", expert, prompt_hash));
  }
  Slot& slot = it->second;
  std::size_t pos = slot.next < slot.responses.size() ? slot.next : slot.responses.size() - 1;
  ++slot.next;
  return slot.responses[pos];
}

bool Transcript::contains(const std::string& expert, const std::string& prompt_hash) const {
  return slots_.count({expert, prompt_hash}) != 0;
}

void Transcript::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::missing_file, fmt::format("cannot write transcript {}", path));
  for (const auto& r : records_) {
    nlohmann::json line = {{"expert", r.expert},
                           {"params", r.params},
                           {"prompt_hash", r.prompt_hash},
                           {"response_text", r.response_text}};
    out << line.dump() << '\n';
  }
}

std::shared_ptr<Transcript> Transcript::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, fmt::format("cannot read transcript {}", path));
  auto t = std::make_shared<Transcript>();
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    t->add(j.at("expert").get<std::string>(), j.at("prompt_hash").get<std::string>(),
           j.at("response_text").get<std::string>(), params_from_json(j.at("params")));
  }
  return t;
}

std::string ReplayExpert::complete(const std::string& prompt, const GenerationParams& params) {
  return transcript_->next_response(name_, prompt_fingerprint(prompt, params));
}

std::string RecordingExpert::complete(const std::string& prompt, const GenerationParams& params) {
  std::string response = inner_->complete(prompt, params);
  transcript_->add(name(), prompt_fingerprint(prompt, params), response, params);
  return response;
}

namespace {

bool keyword_at(const std::string& text, std::size_t pos, const char* keyword) {
  std::size_t len = std::strlen(keyword);
  if (pos + len > text.size()) return false;
  for (std::size_t i = 0; i < len; ++i) {
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) != keyword[i]) return false;
  }
  auto wordish = [](unsigned char c) { return std::isalnum(c) || c == '_'; };
  if (pos > 0 && wordish(static_cast<unsigned char>(text[pos - 1]))) return false;
  if (pos + len < text.size() && wordish(static_cast<unsigned char>(text[pos + len]))) return false;
  return true;
}

/// Scan for the first top-level semicolon, skipping quoted regions.
std::size_t find_statement_end(const std::string& text, std::size_t from) {
  for (std::size_t i = from; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\'' || c == '"' || c == '`') {
      char q = c;
      ++i;
      while (i < text.size()) {
        if (text[i] == q) {
          if (q == '\'' && i + 1 < text.size() && text[i + 1] == '\'') {
            i += 2;
            continue;
          }
          break;
        }
        ++i;
      }
    } else if (c == ';') {
      return i;
    }
  }
  return text.size();
}

std::string finish(std::string sql) {
  sql = trim(sql);
  while (!sql.empty() && sql.back() == ';') {
    sql.pop_back();
    sql = trim(sql);
  }
  return sql;
}

}  // namespace

std::string extract_sql(const std::string& response) {
  std::size_t fence = response.find("```");
  if (fence != std::string::npos) {
    std::size_t body = response.find('\n', fence + 3);
    if (body != std::string::npos) {
      ++body;
      std::size_t close = response.find("```", body);
      std::string content =
          close == std::string::npos ? response.substr(body) : response.substr(body, close - body);
      content = finish(content);
      if (!content.empty()) return content;
    }
  }
  for (std::size_t i = 0; i < response.size(); ++i) {
    if (keyword_at(response, i, "select") || keyword_at(response, i, "with")) {
      std::size_t end = find_statement_end(response, i);
      std::string sql = finish(response.substr(i, end - i));
      if (!sql.empty()) return sql;
    }
  }
  throw Error(Errc::no_sql_found, "response contains no fenced block and no SELECT or WITH statement");
}

std::vector<SqlCandidate> query_ensemble(const std::vector<Expert*>& experts, const std::string& prompt,
                                         const GenerationParams& params) {
  std::vector<SqlCandidate> out(experts.size());
  for (std::size_t i = 0; i < experts.size(); ++i) {
    SqlCandidate& cand = out[i];
    cand.expert_index = i;
    cand.expert_name = experts[i]->name();
    try {
      cand.raw_response = experts[i]->complete(prompt, params);
      cand.sql = extract_sql(cand.raw_response);
    } catch (const Error& e) {
      cand.failed = true;
      cand.failure_reason = e.what();
    }
  }
  return out;
}

}  // namespace sqlens
