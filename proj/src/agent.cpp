#include "sqlens/agent.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sqlens/errors.hpp"
#include "sqlens/hash.hpp"
#include "sqlens/prompt.hpp"
#include "sqlens/strings.hpp"
#include "sqlens/values.hpp"

namespace sqlens {

const char* dialect_name(Dialect d) {
  switch (d) {
    case Dialect::sqlite: return "sqlite";
    case Dialect::bigquery: return "bigquery";
    case Dialect::snowflake: return "snowflake";
  }
  return "sqlite";
}

Dialect dialect_from_name(const std::string& name) {
  for (Dialect d : {Dialect::sqlite, Dialect::bigquery, Dialect::snowflake}) {
    if (name == dialect_name(d)) return d;
  }
  throw Error(Errc::usage, fmt::format("unknown dialect {}", name));
}

const char* dialect_exec_verb(Dialect d) {
  switch (d) {
    case Dialect::sqlite: return "SQLITE_EXEC_SQL";
    case Dialect::bigquery: return "BIGQUERY_EXEC_SQL";
    case Dialect::snowflake: return "SNOWFLAKE_EXEC_SQL";
  }
  return "SQLITE_EXEC_SQL";
}

namespace {

std::string unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    char next = s[i + 1];
    switch (next) {
      case '"': out += '"'; ++i; break;
      case '\\': out += '\\'; ++i; break;
      case 'n': out += '\n'; ++i; break;
      case 't': out += '\t'; ++i; break;
      case 'r': out += '\r'; ++i; break;
      default: out += '\\';
    }
  }
  return out;
}

struct Call {
  std::string name;
  std::vector<std::pair<std::string, std::string>> args;  // insertion order

  const std::string* arg(std::string_view key) const {
    for (const auto& [k, v] : args) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

/// Locates `Action:` at a line start from `from`; npos when absent.
std::size_t find_action_marker(const std::string& text, std::size_t from) {
  std::size_t pos = from;
  while (pos < text.size()) {
    std::size_t line_start = pos;
    while (line_start < text.size() && (text[line_start] == ' ' || text[line_start] == '\t')) {
      ++line_start;
    }
    if (text.compare(line_start, 7, "Action:") == 0 &&
        (line_start == 0 || text[line_start - 1] == '\n' || line_start == pos)) {
      return line_start;
    }
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) return std::string::npos;
    pos = nl + 1;
  }
  return std::string::npos;
}

/// Parses `NAME(key=value, ...)` starting right after an `Action:` marker.
/// Returns the call plus the index one past the closing parenthesis.
std::pair<Call, std::size_t> parse_call(const std::string& text, std::size_t pos) {
  auto fail = [](const std::string& why) -> std::pair<Call, std::size_t> {
    throw Error(Errc::invalid_action, why);
  };

  while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  std::size_t name_start = pos;
  while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
    ++pos;
  }
  if (pos == name_start) return fail("missing action name");
  Call call;
  call.name = text.substr(name_start, pos - name_start);
  while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  if (pos >= text.size() || text[pos] != '(') return fail("expected ( after action name");
  ++pos;

  for (;;) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos >= text.size()) return fail("unterminated action arguments");
    if (text[pos] == ')') return {call, pos + 1};
    if (!call.args.empty()) {
      if (text[pos] != ',') return fail("expected , between arguments");
      ++pos;
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    std::size_t key_start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
      ++pos;
    }
    if (pos == key_start) return fail("missing argument name");
    std::string key = text.substr(key_start, pos - key_start);
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    if (pos >= text.size() || text[pos] != '=') return fail("expected = after argument name");
    ++pos;
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;

    std::string value;
    if (pos < text.size() && text[pos] == '"') {
      ++pos;
      std::size_t value_start = pos;
      while (pos < text.size()) {
        if (text[pos] == '\\' && pos + 1 < text.size()) {
          pos += 2;
          continue;
        }
        if (text[pos] == '"') break;
        ++pos;
      }
      if (pos >= text.size()) return fail("unterminated quoted value");
      value = unescape(text.substr(value_start, pos - value_start));
      ++pos;
    } else {
      std::size_t value_start = pos;
      while (pos < text.size() && text[pos] != ',' && text[pos] != ')') ++pos;
      if (pos >= text.size()) return fail("unterminated action arguments");
      value = trim(text.substr(value_start, pos - value_start));
    }
    call.args.emplace_back(std::move(key), std::move(value));
  }
}

}  // namespace

AgentAction parse_action(const std::string& raw, Dialect dialect) {
  std::size_t marker = find_action_marker(raw, 0);
  if (marker == std::string::npos) {
    throw Error(Errc::invalid_action, "no Action line in response");
  }
  auto [call, end] = parse_call(raw, marker + 7);
  if (find_action_marker(raw, end) != std::string::npos) {
    throw Error(Errc::invalid_action, "more than one Action line in response");
  }

  AgentAction action;
  action.thought = trim(raw.substr(0, marker));
  action.verb = call.name;
  if (call.name == "Terminate") {
    action.kind = AgentAction::Kind::terminate;
    if (const std::string* out = call.arg("output")) action.output_path = *out;
    return action;
  }
  if (call.name != dialect_exec_verb(dialect)) {
    throw Error(Errc::invalid_action, fmt::format("unknown action verb {}", call.name));
  }
  action.kind = AgentAction::Kind::exec_sql;
  const std::string* sql = call.arg("sql_query");
  if (sql == nullptr || trim(*sql).empty()) {
    throw Error(Errc::invalid_action, "exec action carries no sql_query");
  }
  action.sql = *sql;
  if (const std::string* save = call.arg("save_path")) action.save_path = *save;
  return action;
}

namespace {

/// Pulls the JSON object out of a reply: a fenced block when present, else
/// the outermost brace span.
nlohmann::json strict_json_object(const std::string& text, Errc errc) {
  std::string region = text;
  std::size_t fence = text.find("```");
  if (fence != std::string::npos) {
    std::size_t body = text.find('\n', fence);
    std::size_t close = body == std::string::npos ? std::string::npos : text.find("```", body);
    if (body != std::string::npos && close != std::string::npos) {
      region = text.substr(body + 1, close - body - 1);
    }
  }
  std::size_t open = region.find('{');
  std::size_t close = region.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw Error(errc, "reply carries no JSON object");
  }
  nlohmann::json j = nlohmann::json::parse(region.substr(open, close - open + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(errc, "reply is not a JSON object");
  return j;
}

void require_exact_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, Errc errc) {
  if (j.size() != keys.size()) {
    throw Error(errc, fmt::format("expected exactly {} keys, got {}", keys.size(), j.size()));
  }
  for (const char* key : keys) {
    if (!j.contains(key)) throw Error(errc, fmt::format("missing key {}", key));
  }
}

Plan parse_plan(const std::string& response) {
  nlohmann::json j = strict_json_object(response, Errc::plan_parse);
  require_exact_keys(j, {"plan", "expected_csv_format"}, Errc::plan_parse);
  if (!j["plan"].is_array() || j["plan"].empty()) {
    throw Error(Errc::plan_parse, "plan must be a non-empty list");
  }
  Plan plan;
  for (const auto& step : j["plan"]) {
    if (!step.is_string()) throw Error(Errc::plan_parse, "plan steps must be strings");
    plan.steps.push_back(step.get<std::string>());
  }
  if (!j["expected_csv_format"].is_string()) {
    throw Error(Errc::plan_parse, "expected_csv_format must be a string");
  }
  plan.expected_csv_format = j["expected_csv_format"].get<std::string>();
  return plan;
}

std::string numbered_steps(const Plan& plan) {
  std::string out;
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    out += fmt::format("{}. {}\n", i + 1, plan.steps[i]);
  }
  return out;
}

const char* kRetryNote = "\n\nYour previous reply was not valid. Reply with only the strict JSON object.";

}  // namespace

Plan make_plan(const std::string& question, const std::string& context, Expert& expert,
               const GenerationParams& params) {
  std::string prompt =
      "[Task Instruction]\n"
      "Produce only a step-by-step plan in strict JSON format with exactly the keys \"plan\" and "
      "\"expected_csv_format\": \"plan\" is a non-empty list of step strings and "
      "\"expected_csv_format\" names the output columns and their types. Do not write SQL yet.\n";
  if (!context.empty()) prompt += "\n" + context + "\n";
  prompt += "\n[Question]\n" + question + "\n";

  std::string first = expert.complete(prompt, params);
  try {
    return parse_plan(first);
  } catch (const Error&) {
  }
  return parse_plan(expert.complete(prompt + kRetryNote, params));
}

PlanCritique critique_plan(const Plan& plan, const std::string& question, Expert& expert,
                           const GenerationParams& params) {
  std::string prompt =
      "[Instruction]\n"
      "Assess the plan: (1) does it include every step needed to answer the question? (2) is the "
      "reasoning clear and coherent? Reply with strict JSON: {\"update_plan\": true/false, "
      "\"feedback\": \"...\"}\n"
      "\n[Question]\n" +
      question + "\n\n[Plan]\n" + numbered_steps(plan);
  nlohmann::json j = strict_json_object(expert.complete(prompt, params), Errc::verdict_parse);
  require_exact_keys(j, {"update_plan", "feedback"}, Errc::verdict_parse);
  if (!j["update_plan"].is_boolean() || !j["feedback"].is_string()) {
    throw Error(Errc::verdict_parse, "update_plan must be boolean and feedback a string");
  }
  return {j["update_plan"].get<bool>(), j["feedback"].get<std::string>()};
}

SqlCritique parse_sql_critique(const std::string& response, const std::string& original_sql,
                               Dialect dialect) {
  std::size_t reasoning_at = response.find("[Reasoning]");
  std::size_t sql_at = response.find("[SQL]");
  if (reasoning_at == std::string::npos && sql_at == std::string::npos) {
    throw Error(Errc::critique_parse, "reply has neither a [Reasoning] nor an [SQL] section");
  }

  SqlCritique critique;
  if (reasoning_at != std::string::npos) {
    std::size_t begin = reasoning_at + std::strlen("[Reasoning]");
    std::size_t end = sql_at != std::string::npos && sql_at > reasoning_at ? sql_at : response.size();
    critique.reasoning = trim(response.substr(begin, end - begin));
  }
  critique.revised_sql = original_sql;
  if (sql_at == std::string::npos) return critique;

  std::string section = response.substr(sql_at + std::strlen("[SQL]"));
  std::string sql;
  try {
    AgentAction action = parse_action(section, dialect);
    if (action.kind != AgentAction::Kind::exec_sql) {
      throw Error(Errc::critique_parse, "[SQL] section must carry an exec action");
    }
    sql = action.sql;
  } catch (const Error& e) {
    if (e.code() == Errc::critique_parse) throw;
    try {
      sql = extract_sql(section);
    } catch (const Error&) {
      throw Error(Errc::critique_parse, "[SQL] section carries no query");
    }
  }
  if (trim(sql) != trim(original_sql)) {
    critique.revised_sql = sql;
    critique.has_revision = true;
  }
  return critique;
}

SqlCritique critique_sql(const std::string& sql, const Plan& plan, Expert& expert,
                         const GenerationParams& params, Dialect dialect) {
  std::string prompt = fmt::format(
      "[Instruction]\n"
      "Review the SQL for correctness, {} compliance, and consistency with the plan. Respond in two "
      "parts:\n"
      "[Reasoning] your analysis of any flaws.\n"
      "[SQL] the corrected query inside an Action block, or the original query if no change is "
      "needed.\n"
      "\n[Plan]\n{}\n[SQL]\n{}\n",
      dialect_name(dialect), numbered_steps(plan), sql);
  try {
    return parse_sql_critique(expert.complete(prompt, params), sql, dialect);
  } catch (const Error& e) {
    if (e.code() == Errc::step_cap_exceeded) throw;
    SqlCritique keep;
    keep.revised_sql = sql;
    return keep;
  }
}

ValidationVerdict parse_verdict(const std::string& response) {
  nlohmann::json j = strict_json_object(response, Errc::verdict_parse);
  require_exact_keys(j, {"valid_result", "columns_not_needed", "result_empty", "suggest_fix"},
                     Errc::verdict_parse);
  if (!j["valid_result"].is_boolean() || !j["columns_not_needed"].is_array() ||
      !j["result_empty"].is_boolean() || !j["suggest_fix"].is_string()) {
    throw Error(Errc::verdict_parse, "verdict field has the wrong type");
  }
  ValidationVerdict verdict;
  verdict.valid_result = j["valid_result"].get<bool>();
  for (const auto& col : j["columns_not_needed"]) {
    if (!col.is_string()) throw Error(Errc::verdict_parse, "columns_not_needed must hold strings");
    verdict.columns_not_needed.push_back(col.get<std::string>());
  }
  verdict.result_empty = j["result_empty"].get<bool>();
  verdict.suggest_fix = j["suggest_fix"].get<std::string>();
  return verdict;
}

namespace {

std::string result_summary(const ExecResult& result) {
  std::string out = "Columns: ";
  for (std::size_t i = 0; i < result.columns.size(); ++i) {
    if (i > 0) out += ", ";
    out += result.columns[i];
  }
  out += "\nNull counts: ";
  for (std::size_t c = 0; c < result.columns.size(); ++c) {
    std::size_t nulls = 0;
    for (const auto& row : result.rows) {
      if (c < row.size() && row[c].kind == Value::Kind::null) ++nulls;
    }
    if (c > 0) out += ", ";
    out += fmt::format("{}={}", result.columns[c], nulls);
  }
  out += fmt::format("\nRow count: {}\nFirst rows:\n", result.rows.size());
  ExecResult head = result;
  if (head.rows.size() > 3) head.rows.resize(3);
  out += render_result_csv(head);
  return out;
}

}  // namespace

ValidationVerdict validate_result(const std::string& question, const ExecResult& result,
                                  Expert& expert, const GenerationParams& params) {
  std::string prompt =
      "[Instruction]\n"
      "Decide whether the result answers the question: identify unnecessary columns, missing "
      "filters or incomplete logic, and whether the result is empty or uninformative; suggest a "
      "fix when something is wrong. Reply with strict JSON: {\"valid_result\": true/false, "
      "\"columns_not_needed\": [...], \"result_empty\": true/false, \"suggest_fix\": \"...\"}\n"
      "\n[Question]\n" +
      question + "\n\n[Result Summary]\n" + result_summary(result);
  try {
    return parse_verdict(expert.complete(prompt, params));
  } catch (const Error& e) {
    if (e.code() != Errc::verdict_parse) throw;
  }
  try {
    return parse_verdict(expert.complete(prompt + kRetryNote, params));
  } catch (const Error& e) {
    if (e.code() != Errc::verdict_parse) throw;
  }
  ValidationVerdict invalid;
  invalid.valid_result = false;
  invalid.result_empty = result.rows.empty();
  invalid.suggest_fix = "validator reply unparseable";
  return invalid;
}

std::vector<std::string> retrieve(RetrieveKind kind, const std::string& query, std::size_t k,
                                  const std::filesystem::path& corpus_dir,
                                  const SimilarityProvider& provider) {
  (void)kind;
  if (k == 0 || corpus_dir.empty() || !std::filesystem::is_directory(corpus_dir)) return {};

  struct Doc {
    std::string name;
    std::string text;
    double score;
  };
  std::vector<Doc> docs;
  for (const auto& entry : std::filesystem::directory_iterator(corpus_dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path());
    std::stringstream buffer;
    buffer << in.rdbuf();
    docs.push_back({entry.path().filename().string(), buffer.str(), 0.0});
  }
  for (Doc& d : docs) d.score = provider.score(query, d.text);
  std::sort(docs.begin(), docs.end(), [](const Doc& a, const Doc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.name < b.name;
  });
  if (docs.size() > k) docs.resize(k);
  std::vector<std::string> out;
  for (Doc& d : docs) out.push_back(std::move(d.text));
  return out;
}

bool syntax_gate(const std::string& question, Dialect dialect, Expert& expert,
                 const GenerationParams& params) {
  std::string prompt = fmt::format(
      "[Instruction]\n"
      "Answer yes or no: beyond standard SQL, do you need {}-specific syntax clarification to "
      "answer this question?\n"
      "\n[Question]\n{}\n",
      dialect_name(dialect), question);
  std::string reply = to_lower(trim(expert.complete(prompt, params)));
  return reply.rfind("yes", 0) == 0;
}

namespace {

constexpr std::size_t kObservationCap = 4000;

std::string clip(std::string text) {
  if (text.size() > kObservationCap) {
    text.resize(kObservationCap);
    text += "\n[truncated]";
  }
  return text;
}

/// Resolves an env-relative path and rejects anything that escapes root.
/// root must already be canonical.
std::optional<std::filesystem::path> resolve_sandboxed(const std::filesystem::path& root,
                                                       const std::string& rel) {
  std::filesystem::path candidate = std::filesystem::path(rel).is_absolute()
                                        ? std::filesystem::path(rel)
                                        : root / rel;
  std::error_code ec;
  std::filesystem::path canon = std::filesystem::weakly_canonical(candidate, ec);
  if (ec) return std::nullopt;
  auto root_it = root.begin();
  auto canon_it = canon.begin();
  for (; root_it != root.end(); ++root_it, ++canon_it) {
    if (canon_it == canon.end() || *canon_it != *root_it) return std::nullopt;
  }
  return canon;
}

std::string explore_prompt(int step, int max_steps, const std::string& observation) {
  return fmt::format(
      "[Instruction]\n"
      "Explore the environment folder to learn the database schema: tables, columns, types, and "
      "sample values. Only these actions are available:\n"
      "- Action: LIST(path=\"...\")\n"
      "- Action: READ(path=\"...\")\n"
      "- Action: HEAD(path=\"...\", lines=5)\n"
      "- Action: SEARCH(pattern=\"...\", path=\"...\")\n"
      "- Action: Terminate(output=\"table1(col1:TYPE[v1,v2], ...); table2(...)\")\n"
      "When you know enough, terminate with the compact schema. Step {} of {}.\n"
      "\n[Observation]\n{}\n",
      step, max_steps, observation);
}

}  // namespace

ExploreOutcome explore_schema(const std::filesystem::path& env_root, Expert& expert,
                              const GenerationParams& params, int max_steps) {
  ExploreOutcome out;
  if (!std::filesystem::is_directory(env_root)) return out;
  std::filesystem::path root = std::filesystem::weakly_canonical(env_root);

  std::string observation = "You are in the folder now.";
  std::string accumulated;

  auto log_step = [&](const std::string& what, const nlohmann::json& detail) {
    nlohmann::json entry = detail;
    entry["step"] = out.steps;
    entry["what"] = what;
    out.log.push_back(entry);
  };

  while (out.steps < max_steps) {
    std::string response;
    try {
      response = expert.complete(explore_prompt(out.steps + 1, max_steps, observation), params);
    } catch (const Error& e) {
      if (e.code() == Errc::step_cap_exceeded) throw;
      ++out.steps;
      log_step("expert_failure", {{"error", e.what()}});
      break;
    }
    ++out.steps;

    Call call;
    try {
      std::size_t marker = find_action_marker(response, 0);
      if (marker == std::string::npos) throw Error(Errc::invalid_action, "no Action line");
      auto [parsed, end] = parse_call(response, marker + 7);
      if (find_action_marker(response, end) != std::string::npos) {
        throw Error(Errc::invalid_action, "more than one Action line");
      }
      call = parsed;
    } catch (const Error& e) {
      observation = "Invalid action. Use LIST, READ, HEAD, SEARCH, or Terminate.";
      log_step("invalid_action", {{"error", e.what()}});
      continue;
    }

    if (call.name == "Terminate") {
      out.terminated = true;
      if (const std::string* text = call.arg("output")) out.schema_text = *text;
      log_step("terminate", {{"bytes", out.schema_text.size()}});
      return out;
    }

    if (call.name != "LIST" && call.name != "READ" && call.name != "HEAD" && call.name != "SEARCH") {
      observation = "Invalid action. Use LIST, READ, HEAD, SEARCH, or Terminate.";
      log_step("invalid_action", {{"verb", call.name}});
      continue;
    }

    std::string rel = call.arg("path") != nullptr ? *call.arg("path") : std::string();
    if (call.name == "SEARCH" && call.arg("pattern") == nullptr) {
      observation = "SEARCH needs a pattern argument.";
      log_step("invalid_action", {{"verb", call.name}});
      continue;
    }

    std::optional<std::filesystem::path> target = resolve_sandboxed(root, rel);
    if (!target) {
      ++out.sandbox_violations;
      observation = "Sandbox violation: the path escapes the environment.";
      log_step("sandbox_violation", {{"path", rel}});
      continue;
    }

    auto relative_of = [&](const std::filesystem::path& p) {
      return std::filesystem::relative(p, root).generic_string();
    };

    if (call.name == "LIST") {
      if (!std::filesystem::is_directory(*target)) {
        observation = fmt::format("{} is not a directory.", rel.empty() ? "." : rel);
      } else {
        std::vector<std::string> names;
        for (const auto& entry : std::filesystem::directory_iterator(*target)) {
          std::string name = entry.path().filename().string();
          if (entry.is_directory()) name += "/";
          names.push_back(name);
        }
        std::sort(names.begin(), names.end());
        observation.clear();
        for (const std::string& n : names) observation += n + "\n";
        if (observation.empty()) observation = "(empty directory)\n";
      }
      log_step("list", {{"path", rel}});
      continue;
    }

    if (call.name == "SEARCH") {
      std::string pattern = to_lower(*call.arg("pattern"));
      std::vector<std::filesystem::path> files;
      if (std::filesystem::is_regular_file(*target)) {
        files.push_back(*target);
      } else if (std::filesystem::is_directory(*target)) {
        for (const auto& entry : std::filesystem::recursive_directory_iterator(*target)) {
          if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
      }
      std::string matches;
      int hit_count = 0;
      for (const auto& file : files) {
        out.reads.push_back(relative_of(file));
        std::ifstream in(file);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line) && hit_count < 50) {
          ++line_no;
          if (to_lower(line).find(pattern) != std::string::npos) {
            matches += fmt::format("{}:{}: {}\n", relative_of(file), line_no, line);
            ++hit_count;
          }
        }
      }
      observation = matches.empty() ? "No matches.\n" : clip(std::move(matches));
      accumulated += observation;
      log_step("search", {{"path", rel}, {"hits", hit_count}});
      continue;
    }

    // READ and HEAD.
    if (!std::filesystem::is_regular_file(*target)) {
      observation = fmt::format("No such file: {}", rel);
      log_step("missing_file", {{"path", rel}});
      continue;
    }
    out.reads.push_back(relative_of(*target));
    std::ifstream in(*target);
    std::string content;
    if (call.name == "HEAD") {
      int lines = 5;
      if (const std::string* n = call.arg("lines")) {
        try {
          lines = std::max(1, std::stoi(*n));
        } catch (const std::exception&) {
        }
      }
      std::string line;
      for (int i = 0; i < lines && std::getline(in, line); ++i) content += line + "\n";
    } else {
      std::stringstream buffer;
      buffer << in.rdbuf();
      content = buffer.str();
    }
    observation = clip(std::move(content));
    accumulated += observation + "\n";
    log_step(call.name == "HEAD" ? "head" : "read", {{"path", rel}});
  }

  out.schema_text = accumulated;
  return out;
}

std::string render_result_csv(const ExecResult& result) {
  std::string out;
  for (std::size_t i = 0; i < result.columns.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_escape(result.columns[i]);
  }
  out += '\n';
  for (const auto& row : result.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      if (row[i].kind != Value::Kind::null) out += csv_escape(render_value(row[i]));
    }
    out += '\n';
  }
  return out;
}

namespace {

/// Forwards to the real expert while enforcing the episode-wide call budget.
class BudgetedExpert final : public Expert {
 public:
  BudgetedExpert(Expert& inner, int cap, int& calls) : inner_(inner), cap_(cap), calls_(calls) {}

  const std::string& name() const override { return inner_.name(); }

  std::string complete(const std::string& prompt, const GenerationParams& params) override {
    if (calls_ >= cap_) {
      throw Error(Errc::step_cap_exceeded,
                  fmt::format("expert call budget of {} exhausted", cap_));
    }
    ++calls_;
    return inner_.complete(prompt, params);
  }

 private:
  Expert& inner_;
  int cap_;
  int& calls_;
};

std::string required_action_block(Dialect dialect) {
  return fmt::format(
      "[Required Action Format]\n"
      "You must output exactly one of the following actions (no other text):\n"
      "Important: When dealing with numerical results, DO NOT round the numbers.\n"
      "Keep the full precision of the results.\n"
      "\n"
      "- Action: {}(sql_query=\"...\", is_save=..., save_path=\".../result.csv\")\n"
      "- Action: Terminate(output=\".../result.csv\")\n"
      "\n"
      "Generate your next action.\n",
      dialect_exec_verb(dialect));
}

std::string exec_feedback_text(const ExecResult& result) {
  if (result.ok_rows() && result.rows.empty()) {
    return "The query executed successfully but returned 0 rows.";
  }
  return result.error_message;
}

ErrorKind kind_of(const ExecResult& result) {
  if (result.ok_rows()) return ErrorKind::NoResult;
  return result.error_kind;
}

/// Everything run_episode threads through its helpers.
struct Episode {
  const BenchmarkItem& task;
  const std::filesystem::path& env_dir;
  Database* db;
  BudgetedExpert expert;
  const EpisodeOptions& opt;
  EpisodeResult& ep;

  std::string syntax_text;
  std::string linked_schema_text;
  bool explored = false;
  std::string critique_feedback;
  std::string last_exec_sql;

  Episode(const BenchmarkItem& t, const std::filesystem::path& env, Database* d, Expert& e,
          const EpisodeOptions& o, EpisodeResult& r, int& calls)
      : task(t), env_dir(env), db(d), expert(e, o.caps.expert_calls, calls), opt(o), ep(r) {}

  void log(const char* event, nlohmann::json detail) {
    detail["event"] = event;
    ep.log.push_back(std::move(detail));
  }

  ExecResult execute(const std::string& sql) {
    if (opt.dialect == Dialect::sqlite) {
      if (db == nullptr) return ExecResult::make_error(ErrorKind::Other, "no database attached");
      return db->execute(sql, opt.exec);
    }
    if (opt.cloud_replay != nullptr) {
      auto it = opt.cloud_replay->find(sha256_hex(sql));
      if (it != opt.cloud_replay->end()) return it->second;
    }
    return ExecResult::make_error(ErrorKind::Other, "no recorded execution for this query");
  }

  std::string expected_format() const {
    return ep.plan.expected_csv_format.empty()
               ? "CSV with the columns needed to answer the question."
               : ep.plan.expected_csv_format;
  }

  void ensure_schema_link(ErrorKind kind) {
    if (explored || (kind != ErrorKind::TableNotFound && kind != ErrorKind::ColumnNotFound)) return;
    explored = true;
    ExploreOutcome explore = explore_schema(env_dir, expert, opt.params, opt.caps.explore_steps);
    ep.explore_steps += explore.steps;
    ep.sandbox_violations += explore.sandbox_violations;
    linked_schema_text = explore.schema_text;
    log("schema_link", {{"steps", explore.steps},
                        {"terminated", explore.terminated},
                        {"bytes", linked_schema_text.size()}});
  }

  std::string refine_prompt(const std::string& sql, const ExecResult& result) {
    ErrorKind kind = kind_of(result);
    std::string prompt = "[Original SQL]\n" + sql + "\n\n[Previous Execution Result]\n" +
                         exec_feedback_text(result) + "\n";
    prompt += fmt::format("\n[Detected Error Type:] {}\n", error_kind_name(kind));
    prompt += "Select one of the following strategies to apply:\n";
    std::size_t index = 1;
    for (const auto& hint : strategy_menu(kind)) {
      prompt += fmt::format("{}. {}\n", index++, hint);
    }
    if (!linked_schema_text.empty()) {
      prompt += "\n[Schema Information]\n" + linked_schema_text + "\n";
    }
    if (!critique_feedback.empty()) {
      prompt += "\n[Critique Feedback]\n" + critique_feedback + "\n";
    }
    prompt += "\n[Expected Output Format]\n" + expected_format() + "\n\n";
    prompt += required_action_block(opt.dialect);
    return prompt;
  }

  /// Execution-guided repair loop. Returns the last (sql, execution) pair;
  /// the caller decides what a still-failing outcome means.
  std::pair<std::string, ExecResult> refine(std::string sql, ExecResult result) {
    for (int iteration = 0; iteration < opt.caps.refine_iterations && result.failed_or_empty();
         ++iteration) {
      ensure_schema_link(kind_of(result));
      std::string response = expert.complete(refine_prompt(sql, result), opt.params);
      AgentAction action;
      try {
        action = parse_action(response, opt.dialect);
      } catch (const Error& e) {
        log("refine_invalid_action", {{"error", e.what()}});
        continue;
      }
      if (action.kind == AgentAction::Kind::terminate) {
        log("refine_gave_up", {});
        break;
      }
      if (action.sql == sql) {
        log("refine_repetition", {});
        continue;
      }
      sql = action.sql;
      result = execute(sql);
      last_exec_sql = sql;
      log("refine_attempt", {{"failed_or_empty", result.failed_or_empty()}});
    }
    return {std::move(sql), std::move(result)};
  }

  std::string action_prompt(std::size_t step_index, const std::string& observation) {
    std::string prompt = "[User Question]\n" + task.question + "\n";
    if (!task.evidence.empty()) prompt += "Evidence: " + task.evidence + "\n";
    if (opt.dialect != Dialect::sqlite) {
      prompt += "\n[Project Information]\nCurrent Project ID: replay\n"
                "Important: Use these IDs in your queries.\n";
    }
    prompt += "\n[Database Context]\nCurrent Database: " + task.db_id + "\n";
    prompt += "\n[Current Plan]\n" + nlohmann::json(ep.plan.steps).dump() + "\n";
    std::size_t step = std::min(step_index, ep.plan.steps.size() - 1);
    prompt += fmt::format("Current step: {}\n", ep.plan.steps[step]);
    prompt += "\n[Execution Result]\n" + observation + "\n";
    if (!syntax_text.empty()) prompt += "\n[Reference Syntax]\n" + syntax_text + "\n";
    if (!critique_feedback.empty()) prompt += "\n[Critique Feedback]\n" + critique_feedback + "\n";
    prompt += "\n" + required_action_block(opt.dialect);
    return prompt;
  }

  void finish(const std::string& sql, ExecResult result) {
    ep.succeeded = true;
    ep.final_sql = sql;
    ep.result_csv = render_result_csv(result);
    ep.final_execution = std::move(result);
    log("done", {{"rows", ep.final_execution.rows.size()}});
  }

  void run() {
    // Knowledge retrieval, planning, and the plan critique loop.
    std::string knowledge_text;
    if (!opt.bare_act_loop && !opt.knowledge_dir.empty()) {
      auto snippets = retrieve(RetrieveKind::knowledge, task.question, 3, opt.knowledge_dir,
                               HashedBagOfWords{});
      for (const auto& s : snippets) knowledge_text += s + "\n";
      log("retrieve_knowledge", {{"snippets", snippets.size()}});
    }

    if (opt.bare_act_loop) {
      ep.plan.steps = {"Answer the question with one SQL query."};
    } else {
      std::string context = "[Database Context]\nCurrent Database: " + task.db_id + "\n";
      if (!knowledge_text.empty()) context += "\n[External Knowledge]\n" + knowledge_text;
      ep.plan = make_plan(task.question, context, expert, opt.params);
      log("plan", {{"steps", ep.plan.steps.size()}});
      while (ep.plan_critique_rounds < opt.caps.plan_critiques) {
        PlanCritique verdict;
        try {
          verdict = critique_plan(ep.plan, task.question, expert, opt.params);
        } catch (const Error& e) {
          if (e.code() != Errc::verdict_parse) throw;
          log("plan_critique_unparseable", {{"error", e.what()}});
          break;
        }
        ++ep.plan_critique_rounds;
        log("plan_critique", {{"round", ep.plan_critique_rounds}, {"update_plan", verdict.update_plan}});
        if (!verdict.update_plan) break;
        ep.plan = make_plan(task.question,
                            "[Database Context]\nCurrent Database: " + task.db_id +
                                "\n\n[Plan Feedback]\n" + verdict.feedback,
                            expert, opt.params);
        log("replan", {{"steps", ep.plan.steps.size()}});
      }

      if (!opt.syntax_dir.empty() && syntax_gate(task.question, opt.dialect, expert, opt.params)) {
        auto snippets =
            retrieve(RetrieveKind::syntax, task.question, 2, opt.syntax_dir, HashedBagOfWords{});
        for (const auto& s : snippets) syntax_text += s + "\n";
        log("retrieve_syntax", {{"snippets", snippets.size()}});
      }
    }

    // Act loop; the expert-call budget bounds it since every pass costs at
    // least one call.
    std::string observation = "You are in the folder now.";
    std::size_t step_index = 0;
    for (;;) {
      std::string response = expert.complete(action_prompt(step_index, observation), opt.params);
      AgentAction action;
      try {
        action = parse_action(response, opt.dialect);
      } catch (const Error& e) {
        log("invalid_action", {{"error", e.what()}});
        ExecResult bogus = ExecResult::make_error(ErrorKind::Other, e.what());
        auto [sql, result] = refine(last_exec_sql, std::move(bogus));
        if (!result.failed_or_empty()) {
          if (opt.bare_act_loop) return finish(sql, std::move(result));
          observation = "The query returned rows.";
          if (validate_and_maybe_finish(sql, result, observation)) return;
        } else {
          observation = "The previous output was not a valid action.";
        }
        ++step_index;
        continue;
      }

      if (action.kind == AgentAction::Kind::terminate) {
        throw Error(Errc::invalid_action, "terminated without a validated result");
      }

      std::string sql = action.sql;
      if (!opt.bare_act_loop) {
        SqlCritique critique = critique_sql(sql, ep.plan, expert, opt.params, opt.dialect);
        if (critique.has_revision) {
          critique_feedback = critique.reasoning;
          log("sql_critique_revision", {});
          sql = critique.revised_sql;
        }
      }

      ExecResult result;
      if (!last_exec_sql.empty() && sql == last_exec_sql) {
        // Repetition guard: never re-execute a byte-identical query.
        log("repeated_action", {});
        result = ExecResult::make_error(ErrorKind::Other, "repeated action rejected");
      } else {
        result = execute(sql);
        last_exec_sql = sql;
        log("execute", {{"failed_or_empty", result.failed_or_empty()}});
      }

      if (result.failed_or_empty()) {
        std::tie(sql, result) = refine(std::move(sql), std::move(result));
      }
      if (result.failed_or_empty()) {
        observation = exec_feedback_text(result);
        ++step_index;
        continue;
      }

      if (opt.bare_act_loop) return finish(sql, std::move(result));
      if (validate_and_maybe_finish(sql, result, observation)) return;
      ++step_index;
    }
  }

  /// Validation leg of one act pass. True means the episode is done; false
  /// re-enters the loop with the validator's feedback in `observation`.
  bool validate_and_maybe_finish(const std::string& sql, const ExecResult& result,
                                 std::string& observation) {
    ValidationVerdict verdict = validate_result(task.question, result, expert, opt.params);
    log("validate", {{"valid_result", verdict.valid_result},
                     {"result_empty", verdict.result_empty},
                     {"columns_not_needed", verdict.columns_not_needed.size()}});
    if (verdict.valid_result && !verdict.result_empty) {
      if (!verdict.columns_not_needed.empty()) {
        ep.advisory = {{"columns_not_needed", verdict.columns_not_needed}};
        log("advisory", {{"columns_not_needed", verdict.columns_not_needed}});
      }
      finish(sql, result);
      return true;
    }
    critique_feedback = verdict.suggest_fix;
    observation = "Validator rejected the result: " + verdict.suggest_fix;
    return false;
  }
};

std::string failure_text(const Error& e) {
  switch (e.code()) {
    case Errc::transport:
    case Errc::auth_failure:
    case Errc::transcript_miss:
      return std::string("ExpertFailure: ") + e.what();
    default:
      return e.what();
  }
}

}  // namespace

EpisodeResult run_episode(const BenchmarkItem& task, const std::filesystem::path& env_dir,
                          Database* db, Expert& expert, const EpisodeOptions& options) {
  EpisodeResult ep;
  int calls = 0;
  Episode episode(task, env_dir, db, expert, options, ep, calls);
  try {
    episode.run();
  } catch (const Error& e) {
    ep.succeeded = false;
    ep.failure = failure_text(e);
    ep.log.push_back({{"event", "abort"}, {"error", ep.failure}});
  }
  ep.expert_calls = calls;

  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    std::ofstream log_out(options.out_dir / "episode.jsonl", std::ios::trunc);
    for (const auto& entry : ep.log) log_out << entry.dump() << '\n';
    if (ep.succeeded) {
      std::ofstream csv(options.out_dir / "result.csv", std::ios::trunc | std::ios::binary);
      csv << ep.result_csv;
    }
  }
  return ep;
}

}  // namespace sqlens
