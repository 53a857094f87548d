#include <doctest.h>

#include "sqlens/errors.hpp"
#include "sqlens/exec.hpp"
#include "support/fixtures.hpp"

using namespace sqlens;

namespace {

Database open_fixture(const std::string& db_id) {
  return Database(test::fixture_db(db_id).string());
}

}  // namespace

TEST_CASE("opening a missing database raises DatabaseUnreachable") {
  try {
    Database db((test::fixture_root() / "nope" / "missing.sqlite").string());
    FAIL("expected DatabaseUnreachable");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::database_unreachable);
  }
}

TEST_CASE("simple select returns typed rows") {
  Database db = open_fixture("concert_singer");
  ExecResult r = db.execute("SELECT name, age FROM singer WHERE age > 50", {});
  REQUIRE(r.ok_rows());
  CHECK(r.columns == std::vector<std::string>{"name", "age"});
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0][0] == Value::str("Joe"));
  CHECK(r.rows[0][1] == Value::integer(52));
}

TEST_CASE("error taxonomy covers the engine's message shapes") {
  Database db = open_fixture("concert_singer");

  ExecResult syntax = db.execute("SELEC name FROM singer", {});
  REQUIRE(!syntax.ok_rows());
  CHECK(syntax.error_kind == ErrorKind::Syntax);

  ExecResult no_table = db.execute("SELECT x FROM no_such", {});
  CHECK(no_table.error_kind == ErrorKind::TableNotFound);

  ExecResult no_col = db.execute("SELECT no_col FROM singer", {});
  CHECK(no_col.error_kind == ErrorKind::ColumnNotFound);

  ExecResult ambiguous =
      db.execute("SELECT name FROM singer JOIN concert ON singer.id = concert.singer_id", {});
  CHECK(ambiguous.error_kind == ErrorKind::AmbiguousColumn);
}

TEST_CASE("classification is total and maps unknown messages to Other") {
  CHECK(classify_error("near \"SELEC\": syntax error", false) == ErrorKind::Syntax);
  CHECK(classify_error("no such table: singers", false) == ErrorKind::TableNotFound);
  CHECK(classify_error("no such column: age2", false) == ErrorKind::ColumnNotFound);
  CHECK(classify_error("ambiguous column name: name", false) == ErrorKind::AmbiguousColumn);
  CHECK(classify_error("datatype mismatch", false) == ErrorKind::TypeMismatch);
  CHECK(classify_error("interrupted", false) == ErrorKind::Timeout);
  CHECK(classify_error("", true) == ErrorKind::NoResult);
  // A warehouse-style message with no local counterpart falls through.
  CHECK(classify_error(
            "No matching signature for operator BETWEEN for argument types: STRING, INT64, INT64",
            false) == ErrorKind::Other);
  CHECK(error_kind_from_name(error_kind_name(ErrorKind::Other)) == ErrorKind::Other);
}

TEST_CASE("writes are rejected by the sandbox") {
  Database db = open_fixture("concert_singer");
  for (const char* sql : {"INSERT INTO singer VALUES (99, 'X', 'Y', 1)",
                          "UPDATE singer SET age = 1", "DELETE FROM singer",
                          "DROP TABLE singer", "CREATE TABLE t (a)"}) {
    ExecResult r = db.execute(sql, {});
    CHECK(!r.ok_rows());
  }
  // The database is untouched afterwards.
  ExecResult count = db.execute("SELECT count(*) FROM singer", {});
  REQUIRE(count.ok_rows());
  CHECK(count.rows[0][0] == Value::integer(6));
}

TEST_CASE("the authorizer trace records touched tables") {
  Database db = open_fixture("concert_singer");
  std::set<std::string> trace;
  ExecOptions options;
  options.table_trace = &trace;
  db.execute("SELECT s.name FROM singer s JOIN song ON s.id = song.singer_id", options);
  CHECK(trace == std::set<std::string>{"singer", "song"});
}

TEST_CASE("the trace holds base tables only, never CTE names") {
  Database db = open_fixture("concert_singer");
  std::set<std::string> trace;
  ExecOptions options;
  options.table_trace = &trace;
  ExecResult r = db.execute(
      "WITH active AS (SELECT singer_id FROM singer_in_concert) SELECT count(*) FROM active",
      options);
  REQUIRE(r.ok_rows());
  CHECK(trace == std::set<std::string>{"singer_in_concert"});
}

TEST_CASE("runaway queries hit the timeout and classify as Timeout") {
  Database db = open_fixture("concert_singer");
  ExecOptions options;
  options.timeout = std::chrono::milliseconds(150);
  // Unbounded recursion keeps the engine stepping until interrupted.
  ExecResult r = db.execute(
      "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) "
      "SELECT count(*) FROM c",
      options);
  REQUIRE(!r.ok_rows());
  CHECK(r.error_kind == ErrorKind::Timeout);
}

TEST_CASE("row cap truncates without failing") {
  Database db = open_fixture("concert_singer");
  ExecOptions options;
  options.max_rows = 4;
  ExecResult r = db.execute("SELECT a.id FROM singer a JOIN singer b", options);
  REQUIRE(r.ok_rows());
  CHECK(r.rows.size() == 4);
  CHECK(r.truncated);
}

TEST_CASE("order sensitivity comes from the gold's top-level ORDER BY") {
  CHECK(order_sensitive_for_gold("SELECT name FROM singer ORDER BY age"));
  CHECK(!order_sensitive_for_gold("SELECT name FROM singer"));
  // ORDER BY buried in a subquery does not make the result ordered.
  CHECK(!order_sensitive_for_gold(
      "SELECT name FROM (SELECT name FROM singer ORDER BY age LIMIT 3)"));
  CHECK(order_sensitive_for_gold(
      "SELECT name FROM singer UNION SELECT title FROM song ORDER BY 1"));
}

TEST_CASE("execution match is order-insensitive unless the gold orders") {
  Database db = open_fixture("concert_singer");
  ExecResult asc = db.execute("SELECT name FROM singer ORDER BY age ASC", {});
  ExecResult desc = db.execute("SELECT name FROM singer ORDER BY age DESC", {});
  REQUIRE(asc.ok_rows());
  REQUIRE(desc.ok_rows());
  CHECK(execution_match(asc, desc, false));
  CHECK(!execution_match(asc, desc, true));
  CHECK(execution_match(asc, asc, true));
}

TEST_CASE("count-style integers match integral averages after normalization") {
  Database db = open_fixture("concert_singer");
  ExecResult avg = db.execute("SELECT avg(age) FROM singer", {});
  ExecResult as_int = db.execute("SELECT 37", {});
  REQUIRE(avg.ok_rows());
  CHECK(avg.rows[0][0].kind == Value::Kind::real);
  CHECK(execution_match(avg, as_int, false));
}

TEST_CASE("text and numbers never match across kinds") {
  Database db = open_fixture("concert_singer");
  ExecResult num = db.execute("SELECT 37", {});
  ExecResult text = db.execute("SELECT '37'", {});
  CHECK(!execution_match(num, text, false));
}

TEST_CASE("fingerprint equality coincides with execution match") {
  Database db = open_fixture("concert_singer");
  ExecResult a = db.execute("SELECT name FROM singer WHERE age > 30", {});
  ExecResult b = db.execute("SELECT name FROM singer WHERE age >= 31 ORDER BY name", {});
  ExecResult c = db.execute("SELECT name FROM singer WHERE age > 40", {});
  REQUIRE(a.ok_rows());
  REQUIRE(b.ok_rows());
  REQUIRE(c.ok_rows());
  CHECK(fingerprint(a, false) == fingerprint(b, false));
  CHECK(execution_match(a, b, false));
  CHECK(fingerprint(a, false) != fingerprint(c, false));
  CHECK(!execution_match(a, c, false));

  ExecResult err = db.execute("SELECT x FROM no_such", {});
  CHECK_THROWS_AS(fingerprint(err, false), Error);
}

TEST_CASE("exec results round-trip through JSON bit-identically") {
  Database db = open_fixture("shop");
  ExecResult rows = db.execute("SELECT name, price FROM product ORDER BY product_id", {});
  ExecResult back = exec_result_from_json(exec_result_to_json(rows));
  CHECK(back.ok_rows());
  CHECK(back.columns == rows.columns);
  CHECK(back.rows == rows.rows);
  CHECK(fingerprint(back, true) == fingerprint(rows, true));

  ExecResult err = db.execute("SELECT x FROM no_such", {});
  ExecResult err_back = exec_result_from_json(exec_result_to_json(err));
  CHECK(err_back.error_kind == err.error_kind);
  CHECK(err_back.error_message == err.error_message);
}

TEST_CASE("NoResult requires both success and emptiness") {
  Database db = open_fixture("concert_singer");
  ExecResult empty = db.execute("SELECT name FROM singer WHERE age > 999", {});
  REQUIRE(empty.ok_rows());
  CHECK(empty.empty_rows());
  CHECK(empty.failed_or_empty());
  ExecResult full = db.execute("SELECT name FROM singer", {});
  CHECK(!full.failed_or_empty());
}
