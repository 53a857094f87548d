#pragma once

#include <set>
#include <string>
#include <vector>

#include "sqlens/schema.hpp"

namespace sqlens {

// Table and column references extracted from one SQL candidate. Aliases are
// already resolved to base tables; every column's table appears in `tables`.
// Bare names that could not be attributed to exactly one in-scope table sit
// in `unresolved` until union_links gives them a last chance.
struct SqlReferenceSet {
  std::set<std::string> tables;
  std::set<std::pair<std::string, std::string>> columns;
  std::set<std::string> unresolved;

  bool operator==(const SqlReferenceSet&) const = default;
};

// Walks the candidate's scope tree and resolves every reference against the
// schema. CTE names are scoped virtual tables: excluded from the output,
// while base tables inside their bodies are included. Throws
// Error(Errc::unparseable_sql) when the candidate cannot be parsed.
SqlReferenceSet extract_references(const std::string& sql, const DatabaseSchema& schema);

// Set union across candidates. Unresolved bare names are kept only when
// exactly one table in the whole schema owns the column; everything else is
// dropped. An empty input yields an empty link.
LinkedSchema union_links(const std::vector<SqlReferenceSet>& refsets,
                         const DatabaseSchema& schema);

}  // namespace sqlens
