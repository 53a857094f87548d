#include <doctest.h>

#include "sqlens/errors.hpp"
#include "sqlens/refine.hpp"
#include "support/fixtures.hpp"

using namespace sqlens;

namespace {

SqlCandidate candidate_with(const std::string& sql) {
  SqlCandidate c;
  c.expert_index = 0;
  c.expert_name = "fix";
  c.sql = sql;
  c.raw_response = sql;
  return c;
}

const std::string kContext = "[Instruction]\nWrite SQLite.\n\n[Question]\nQ: how many singers?\nSQL:\n";

}  // namespace

TEST_CASE("an error is fixed on the second attempt") {
  Database db(test::fixture_db("concert_singer").string());
  auto expert = ScriptedExpert::sequence("fix", {"```sql\nSELECT count(*) FROM singer\n```"});

  auto out = refine_candidate(candidate_with("SELECT count(*) FROM singers"), *expert, db, kContext, {});

  REQUIRE(out.attempts.size() == 2);
  CHECK(out.succeeded);
  CHECK(out.attempts[0].sql == "SELECT count(*) FROM singers");
  CHECK_FALSE(out.attempts[0].execution.ok_rows());
  CHECK(out.attempts[1].sql == "SELECT count(*) FROM singer");
  CHECK(out.attempts[1].execution.rows.at(0).at(0).as_int == 6);
  CHECK(out.candidate.sql == "SELECT count(*) FROM singer");
  CHECK(out.candidate.executed);
  CHECK(expert->calls() == 1);

  // The rewrite prompt extends the base context with the failing SQL and the
  // verbatim engine error.
  const std::string& prompt = out.attempts[1].prompt;
  CHECK(prompt.rfind(kContext, 0) == 0);
  CHECK(prompt.find("SELECT count(*) FROM singers") != std::string::npos);
  CHECK(prompt.find("no such table: singers") != std::string::npos);
  CHECK(prompt.find("[Detected Error Type:] TableNotFound") != std::string::npos);
}

TEST_CASE("a never-fixed candidate exhausts the cap and is retained") {
  Database db(test::fixture_db("concert_singer").string());
  auto expert = ScriptedExpert::constant("fix", "```sql\nSELECT * FROM still_missing\n```");

  auto out = refine_candidate(candidate_with("SELECT * FROM missing"), *expert, db, kContext, {});

  REQUIRE(out.attempts.size() == 3);
  CHECK_FALSE(out.succeeded);
  // Two rewrites: initial execution plus attempts 2 and 3.
  CHECK(expert->calls() == 2);
  CHECK(out.candidate.sql == "SELECT * FROM still_missing");
  CHECK(out.candidate.executed);
  CHECK_FALSE(out.candidate.execution.ok_rows());

  // Context grows monotonically: each prompt starts with the previous one.
  CHECK(out.attempts[2].prompt.rfind(out.attempts[1].prompt, 0) == 0);
  CHECK(out.attempts[2].prompt.find("SELECT * FROM missing") != std::string::npos);
}

TEST_CASE("a clean first execution never calls the expert") {
  Database db(test::fixture_db("concert_singer").string());
  auto expert = ScriptedExpert::failing("fix", "must not be called");

  auto out = refine_candidate(candidate_with("SELECT name FROM singer"), *expert, db, kContext, {});

  REQUIRE(out.attempts.size() == 1);
  CHECK(out.succeeded);
  CHECK(expert->calls() == 0);
}

TEST_CASE("zero rows trigger refinement with the NoResult menu") {
  Database db(test::fixture_db("concert_singer").string());
  auto expert =
      ScriptedExpert::sequence("fix", {"```sql\nSELECT name FROM singer WHERE country = 'France'\n```"});

  auto out = refine_candidate(candidate_with("SELECT name FROM singer WHERE country = 'Atlantis'"),
                              *expert, db, kContext, {});

  REQUIRE(out.attempts.size() == 2);
  CHECK(out.succeeded);
  CHECK(out.attempts[1].prompt.find("[Detected Error Type:] NoResult") != std::string::npos);
  CHECK(out.attempts[1].prompt.find("returned 0 rows") != std::string::npos);
}

TEST_CASE("a custom cap bounds total executions") {
  Database db(test::fixture_db("concert_singer").string());
  auto expert = ScriptedExpert::constant("fix", "```sql\nSELECT * FROM nope\n```");
  RefineOptions opts;
  opts.max_iterations = 5;

  auto out = refine_candidate(candidate_with("SELECT * FROM missing"), *expert, db, kContext, {}, opts);
  CHECK(out.attempts.size() == 5);
  CHECK(expert->calls() == 4);

  opts.max_iterations = 1;
  auto one = refine_candidate(candidate_with("SELECT * FROM missing"), *expert, db, kContext, {}, opts);
  CHECK(one.attempts.size() == 1);
  CHECK_FALSE(one.succeeded);
}

TEST_CASE("a failed candidate passes through untouched") {
  Database db(test::fixture_db("concert_singer").string());
  auto expert = ScriptedExpert::failing("fix", "unused");
  SqlCandidate failed;
  failed.failed = true;
  failed.failure_reason = "transport: boom";

  auto out = refine_candidate(failed, *expert, db, kContext, {});
  CHECK(out.attempts.empty());
  CHECK_FALSE(out.succeeded);
  CHECK(out.candidate.failed);
  CHECK(expert->calls() == 0);
}

TEST_CASE("an expert dying mid-loop ends refinement with retention") {
  Database db(test::fixture_db("concert_singer").string());
  auto expert = ScriptedExpert::sequence("fix", {"```sql\nSELECT * FROM also_missing\n```"});

  RefineOptions opts;
  opts.max_iterations = 4;
  auto out = refine_candidate(candidate_with("SELECT * FROM missing"), *expert, db, kContext, {}, opts);

  // Rewrite 1 consumed the script; rewrite 2 hit the exhausted sequence.
  CHECK(out.attempts.size() == 2);
  CHECK_FALSE(out.succeeded);
  CHECK(out.candidate.sql == "SELECT * FROM also_missing");
}

TEST_CASE("refine outcomes round trip through JSON") {
  Database db(test::fixture_db("concert_singer").string());
  auto expert = ScriptedExpert::sequence("fix", {"```sql\nSELECT count(*) FROM singer\n```"});
  auto out = refine_candidate(candidate_with("SELECT count(*) FROM singers"), *expert, db, kContext, {});

  auto j = refine_outcome_to_json(out);
  auto back = refine_outcome_from_json(j);
  CHECK(back.succeeded == out.succeeded);
  REQUIRE(back.attempts.size() == out.attempts.size());
  CHECK(back.attempts[1].prompt == out.attempts[1].prompt);
  CHECK(back.candidate.sql == out.candidate.sql);
  CHECK(refine_outcome_to_json(back) == j);
}
