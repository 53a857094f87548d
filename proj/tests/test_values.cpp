#include <doctest.h>

#include "sqlens/hash.hpp"
#include "sqlens/strings.hpp"
#include "sqlens/values.hpp"

using namespace sqlens;

TEST_CASE("integral reals collapse to integers") {
  CHECK(normalize_value(Value::real(37.0)) == Value::integer(37));
  CHECK(normalize_value(Value::real(-0.0)) == Value::integer(0));
  CHECK(normalize_value(Value::real(1200.0)) == Value::integer(1200));
  // Beyond 2^53 a double cannot name an exact integer; stays real.
  CHECK(normalize_value(Value::real(1e300)).kind == Value::Kind::real);
}

TEST_CASE("quantization makes nearly-equal reals identical") {
  Value a = normalize_value(Value::real(0.1 + 0.2));
  Value b = normalize_value(Value::real(0.3));
  CHECK(a == b);
  // Differences past the seventh significant digit vanish.
  CHECK(normalize_value(Value::real(16.35571401)) == normalize_value(Value::real(16.35571422)));
  // Differences within seven significant digits survive.
  CHECK(normalize_value(Value::real(16.3557)) != normalize_value(Value::real(16.3558)));
}

TEST_CASE("non-real values pass through normalization") {
  CHECK(normalize_value(Value::integer(5)) == Value::integer(5));
  CHECK(normalize_value(Value::str("5.0")) == Value::str("5.0"));
  CHECK(normalize_value(Value::null()) == Value::null());
}

TEST_CASE("canonical encodings are kind-tagged and injective across kinds") {
  CHECK(canonical_encoding(Value::null()) == "n");
  CHECK(canonical_encoding(Value::integer(37)) == "i:37");
  CHECK(canonical_encoding(Value::str("37")) == "t:37");
  CHECK(canonical_encoding(Value::real(16.355714)) == "r:1.635571e+01");
  CHECK(canonical_encoding(Value::blob(std::string("\x00\xff", 2))) == "b:00ff");
}

TEST_CASE("value JSON round-trip preserves every kind") {
  for (const Value& v : {Value::null(), Value::integer(-12), Value::real(2652.99),
                         Value::str("O'Brien"), Value::blob("\x01\x02")}) {
    CHECK(value_from_json(value_to_json(v)) == v);
  }
}

TEST_CASE("render_value uses shortest round-trip decimals") {
  CHECK(render_value(Value::real(2652.99)) == "2652.99");
  CHECK(render_value(Value::integer(42)) == "42");
  CHECK(render_value(Value::null()) == "NULL");
  CHECK(render_value(Value::str("abc")) == "abc");
}

TEST_CASE("sha256 matches the published test vector") {
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("normalize_sql_text lowercases outside quoted regions only") {
  CHECK(normalize_sql_text("SELECT  Name FROM  Singer ;") == "select name from singer");
  CHECK(normalize_sql_text("SELECT 'UK' FROM t") == "select 'UK' from t");
  CHECK(normalize_sql_text("SELECT \"Name\" FROM t") == "select \"Name\" from t");
  CHECK(normalize_sql_text("select 'it''s OK'") == "select 'it''s OK'");
  CHECK(normalize_sql_text("SELECT a\n\tFROM b") == "select a from b");
}

TEST_CASE("csv_escape quotes only when needed") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_escape("line\nbreak") == "\"line\nbreak\"");
}
