#pragma once

#include <memory>
#include <string>
#include <vector>

namespace sqlens {

// A table named in a FROM or JOIN clause, possibly aliased.
struct TableUse {
  std::string name;
  std::string alias;  // empty when unaliased
};

// A column reference as written. The qualifier may be a table name, an
// alias, or empty for bare references.
struct ColumnUse {
  std::string qualifier;
  std::string column;
};

// One SELECT scope. Derived tables, expression subqueries, and CTE bodies
// become child scopes; name resolution walks parent pointers outward.
// Compound selects (UNION etc.) share the first core's scope; later cores
// become children so their FROM lists stay separate.
struct SqlScope {
  std::vector<TableUse> tables;              // base tables in FROM/JOIN
  std::vector<std::string> derived_aliases;  // derived tables and CTE uses
  std::vector<std::string> cte_names;        // WITH names declared here
  std::vector<ColumnUse> columns;            // column refs in this scope's clauses
  std::vector<std::string> stars;            // "" for a bare *, else the qualifier
  std::vector<std::string> select_aliases;   // output aliases declared here
  std::vector<std::string> using_columns;    // JOIN ... USING (a, b)
  // Names this scope exposes as result columns (aliases, plain select-list
  // columns, CTE column-list renames); star_output marks a `*` select list.
  // Outer scopes consult these when a bare name turns out to belong to a
  // derived table rather than a base table.
  std::vector<std::string> output_names;
  bool star_output = false;
  std::vector<std::unique_ptr<SqlScope>> children;
  SqlScope* parent = nullptr;
};

struct ParsedSql {
  std::unique_ptr<SqlScope> root;
  bool top_level_order_by = false;
};

// Parses a SELECT statement (including WITH, compounds, subqueries) into a
// scope tree. Throws Error(Errc::unparseable_sql) on anything it cannot
// walk; callers treat that as "links nothing", not as a hard failure.
ParsedSql parse_sql(const std::string& sql);

}  // namespace sqlens
