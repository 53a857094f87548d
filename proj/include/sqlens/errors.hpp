#pragma once

#include <stdexcept>
#include <string>

namespace sqlens {

// Error codes for every operation-level failure surfaced by the library.
enum class Errc {
  // corpus
  missing_file,
  malformed_catalog,
  unknown_format,
  storage_full,
  duplicate_key,
  empty_store,
  // schema
  database_unreachable,
  empty_link,
  // linker
  unparseable_sql,
  // prompt
  missing_section,
  // experts
  transport,
  auth_failure,
  transcript_miss,
  no_sql_found,
  // exec
  not_rows,
  // vote
  missing_gold,
  // agent
  plan_parse,
  verdict_parse,
  critique_parse,
  invalid_action,
  sandbox_violation,
  step_cap_exceeded,
  expert_failure,
  empty_corpus,
  // cli
  usage,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace sqlens
