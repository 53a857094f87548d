#include <doctest.h>

#include "sqlens/errors.hpp"
#include "sqlens/prompt.hpp"
#include "sqlens/schema.hpp"
#include "sqlens/similarity.hpp"
#include "sqlens/strings.hpp"
#include "support/fixtures.hpp"

using namespace sqlens;

TEST_CASE("hashed bag-of-words similarity orders by overlap") {
  HashedBagOfWords sim;
  std::string q = "How many singers are from France?";
  double close = sim.score(q, "How many singers are from Spain?");
  double far = sim.score(q, "List every stadium by capacity.");
  CHECK(close > far);
  CHECK(sim.score(q, q) == doctest::Approx(1.0));
  CHECK(sim.score(q, "") == 0.0);
  CHECK(sim.score("", "") == 0.0);
  // Tokenization ignores case and punctuation.
  CHECK(sim.score("COUNT the Singers!", "count the singers") == doctest::Approx(1.0));
}

TEST_CASE("select_few_shots ranks by similarity with index tie-break") {
  std::vector<Demonstration> pool = {
      {"List every stadium by capacity.", "SELECT name FROM stadium ORDER BY capacity"},
      {"How many singers are from Spain?", "SELECT count(*) FROM singer WHERE country = 'Spain'"},
      {"How many singers are from Italy?", "SELECT count(*) FROM singer WHERE country = 'Italy'"},
      {"How many concerts happened in 2014?", "SELECT count(*) FROM concert WHERE year = 2014"},
  };
  HashedBagOfWords sim;
  std::string q = "How many singers are from France?";

  auto picked = select_few_shots(q, pool, 2, sim);
  REQUIRE(picked.size() == 2);
  // Spain and Italy tie exactly; pool order breaks the tie.
  CHECK(picked[0].question == pool[1].question);
  CHECK(picked[1].question == pool[2].question);

  SUBCASE("k larger than the pool returns everything") {
    CHECK(select_few_shots(q, pool, 99, sim).size() == 4);
  }
  SUBCASE("k zero returns nothing") {
    CHECK(select_few_shots(q, pool, 0, sim).empty());
  }
  SUBCASE("an exact-match pool entry is excluded") {
    auto leaky = pool;
    leaky.push_back({q, "SELECT count(*) FROM singer WHERE country = 'France'"});
    auto demos = select_few_shots(q, leaky, 99, sim);
    CHECK(demos.size() == 4);
    for (const auto& d : demos) CHECK(d.question != q);
  }
}

namespace {

PromptSpec base_spec() {
  PromptSpec spec;
  spec.kind = PromptKind::presql;
  spec.instruction = "Write a SQLite query answering the question.";
  spec.schema_text = render_full_ddl(test::concert_singer_schema(), false);
  spec.cell_samples = "singer: Joe Sharp | 52";
  spec.demonstrations = {{"How many singers do we have?", "SELECT count(*) FROM singer"}};
  spec.question = "How many singers are from France?";
  return spec;
}

}  // namespace

TEST_CASE("generation prompt renders sections in fixed order") {
  PromptSpec spec = base_spec();
  std::string text = build_prompt(spec);

  auto pos = [&](const char* needle) { return text.find(needle); };
  REQUIRE(pos("[Instruction]") != std::string::npos);
  REQUIRE(pos("[Schema]") != std::string::npos);
  REQUIRE(pos("[Cell Samples]") != std::string::npos);
  REQUIRE(pos("[Demonstrations]") != std::string::npos);
  REQUIRE(pos("[Question]") != std::string::npos);
  CHECK(pos("[Instruction]") < pos("[Schema]"));
  CHECK(pos("[Schema]") < pos("[Cell Samples]"));
  CHECK(pos("[Cell Samples]") < pos("[Demonstrations]"));
  CHECK(pos("[Demonstrations]") < pos("[Question]"));
  CHECK(text.find("Q: How many singers do we have?") < pos("[Question]"));
  CHECK(text.rfind("SQL:\n") == text.size() - 5);

  SUBCASE("identical specs render identical bytes") {
    CHECK(build_prompt(base_spec()) == text);
  }
  SUBCASE("evidence lands inside the question section") {
    spec.evidence = "France is stored as country code FR.";
    std::string with = build_prompt(spec);
    CHECK(with.find("Evidence: France is stored as country code FR.") > with.find("[Question]"));
  }
  SUBCASE("optional sections drop out cleanly") {
    spec.cell_samples.clear();
    spec.demonstrations.clear();
    std::string bare = build_prompt(spec);
    CHECK(bare.find("[Cell Samples]") == std::string::npos);
    CHECK(bare.find("[Demonstrations]") == std::string::npos);
  }
}

TEST_CASE("mandatory sections are enforced") {
  PromptSpec spec = base_spec();
  spec.instruction.clear();
  CHECK_THROWS_AS(build_prompt(spec), Error);

  spec = base_spec();
  spec.schema_text.clear();
  try {
    build_prompt(spec);
    FAIL("expected missing_section");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::missing_section);
  }

  spec = base_spec();
  spec.question.clear();
  CHECK_THROWS_AS(build_prompt(spec), Error);
}

TEST_CASE("pruned-schema prompt never exceeds the full-schema prompt") {
  PromptSpec pre = base_spec();
  pre.demonstrations.clear();
  pre.cell_samples.clear();

  LinkedSchema link;
  link.tables = {"singer"};
  link.columns = {{"singer", "country"}};
  PromptSpec post = pre;
  post.kind = PromptKind::postsql;
  post.schema_text = render_full_ddl(prune(test::concert_singer_schema(), link), false);

  CHECK(token_count(build_prompt(post)) <= token_count(build_prompt(pre)));
  CHECK(build_prompt(post).size() < build_prompt(pre).size());
}

TEST_CASE("refine prompt carries the failure verbatim") {
  PromptSpec spec;
  spec.kind = PromptKind::refine;
  spec.prior_context = build_prompt(base_spec());
  spec.prior_sql = "SELECT count(*) FROM singers";
  spec.error_message = "no such table: singers";
  spec.error_kind = ErrorKind::TableNotFound;
  std::string text = build_prompt(spec);

  CHECK(text.rfind(spec.prior_context, 0) == 0);
  CHECK(text.find("[Original SQL]\nSELECT count(*) FROM singers") != std::string::npos);
  CHECK(text.find("no such table: singers") != std::string::npos);
  CHECK(text.find("[Detected Error Type:] TableNotFound") != std::string::npos);
  CHECK(text.find("Select one of the following strategies to apply:") != std::string::npos);
  CHECK(text.find("1. List the tables that actually exist in the schema.") != std::string::npos);
  CHECK(text.find("Explain your strategy choice and apply it to refine the SQL.") != std::string::npos);
  CHECK(text.find("[Expected Output Format]") != std::string::npos);

  SUBCASE("empty result renders the zero-row note and NoResult menu") {
    spec.error_message.clear();
    spec.error_kind = ErrorKind::NoResult;
    std::string empty = build_prompt(spec);
    CHECK(empty.find("returned 0 rows") != std::string::npos);
    CHECK(empty.find("[Detected Error Type:] NoResult") != std::string::npos);
    CHECK(empty.find("Relax or remove filtering conditions one at a time.") != std::string::npos);
  }
  SUBCASE("unknown failures use the generic menu") {
    spec.error_kind = ErrorKind::Other;
    std::string other = build_prompt(spec);
    CHECK(other.find("[Detected Error Type:] OtherError") != std::string::npos);
    CHECK(other.find("1. Try simplifying query structure.") != std::string::npos);
    CHECK(other.find("2. Focus on filtering conditions.") != std::string::npos);
    CHECK(other.find("3. Try SELECT with minimal columns first.") != std::string::npos);
    CHECK(other.find("4. Double-check all referenced schema components.") != std::string::npos);
  }
  SUBCASE("refine without prior context is rejected") {
    spec.prior_context.clear();
    CHECK_THROWS_AS(build_prompt(spec), Error);
  }
}

TEST_CASE("every error kind has a four-entry strategy menu") {
  for (ErrorKind k : {ErrorKind::Syntax, ErrorKind::TableNotFound, ErrorKind::ColumnNotFound,
                      ErrorKind::TypeMismatch, ErrorKind::AmbiguousColumn, ErrorKind::Timeout,
                      ErrorKind::NoResult, ErrorKind::Other}) {
    CHECK(strategy_menu(k).size() == 4);
  }
}
