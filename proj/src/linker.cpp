#include "sqlens/linker.hpp"

#include <unordered_map>

#include "sqlens/sql_parser.hpp"
#include "sqlens/strings.hpp"

namespace sqlens {
namespace {

// Per-scope resolution context, computed once before the walk.
struct ScopeInfo {
  std::vector<std::string> base_tables;  // canonical schema names
  // lowercased alias-or-name -> canonical table name, "" for derived
  // tables, CTE uses, and tables absent from the schema.
  std::unordered_map<std::string, std::string> qualifiers;
  std::vector<std::string> select_aliases;  // lowercased
};

class Resolver {
 public:
  Resolver(const DatabaseSchema& schema, SqlReferenceSet& out) : schema_(schema), out_(out) {}

  void run(const SqlScope& root) {
    annotate(root);
    walk(root);
  }

 private:
  const DatabaseSchema& schema_;
  SqlReferenceSet& out_;
  std::unordered_map<const SqlScope*, ScopeInfo> info_;

  void annotate(const SqlScope& scope) {
    ScopeInfo info;
    for (const TableUse& use : scope.tables) {
      auto idx = schema_.find_table(use.name);
      std::string canonical = idx ? schema_.tables[*idx].name : "";
      if (idx) info.base_tables.push_back(canonical);
      info.qualifiers[to_lower(use.name)] = canonical;
      if (!use.alias.empty()) info.qualifiers[to_lower(use.alias)] = canonical;
    }
    for (const std::string& alias : scope.derived_aliases) {
      info.qualifiers[to_lower(alias)] = "";
    }
    for (const std::string& alias : scope.select_aliases) {
      info.select_aliases.push_back(to_lower(alias));
    }
    info_.emplace(&scope, std::move(info));
    for (const auto& child : scope.children) annotate(*child);
  }

  const ScopeInfo& info(const SqlScope& scope) const { return info_.at(&scope); }

  void add_column(const std::string& table, std::size_t column_idx) {
    const TableDef& def = *schema_.table(table);
    out_.tables.insert(def.name);
    out_.columns.emplace(def.name, def.columns[column_idx].name);
  }

  void resolve_qualified(const SqlScope& scope, const ColumnUse& use) {
    std::string key = to_lower(use.qualifier);
    for (const SqlScope* s = &scope; s != nullptr; s = s->parent) {
      auto it = info(*s).qualifiers.find(key);
      if (it == info(*s).qualifiers.end()) continue;
      if (it->second.empty()) return;  // derived table or unknown base: nothing to link
      const TableDef& def = *schema_.table(it->second);
      if (auto col = def.find_column(use.column)) add_column(it->second, *col);
      return;  // wrong column on a real table links nothing
    }
    // Qualifier matches no visible name; treat the written table name as a
    // direct schema reference before giving up (LLM output often qualifies
    // by table even when an alias was declared elsewhere).
    if (auto idx = schema_.find_table(use.qualifier)) {
      const TableDef& def = schema_.tables[*idx];
      if (auto col = def.find_column(use.column)) add_column(def.name, *col);
    }
  }

  // True when a derived table or CTE visible at this level exposes `name`
  // as one of its result columns.
  static bool derived_output_matches(const SqlScope& s, const std::string& name) {
    for (const auto& child : s.children) {
      if (child->star_output) return true;
      for (const std::string& out : child->output_names) {
        if (iequals(out, name)) return true;
      }
    }
    return false;
  }

  void resolve_bare(const SqlScope& scope, const std::string& name) {
    for (const SqlScope* s = &scope; s != nullptr; s = s->parent) {
      std::vector<std::pair<std::string, std::size_t>> owners;
      for (const std::string& table : info(*s).base_tables) {
        if (auto col = schema_.table(table)->find_column(name)) {
          owners.emplace_back(table, *col);
        }
      }
      if (owners.size() == 1) {
        add_column(owners[0].first, owners[0].second);
        return;
      }
      if (owners.size() > 1) {
        // Ambiguous at the innermost level that knows the name; dropping is
        // safer than guessing an attribution.
        out_.unresolved.insert(name);
        return;
      }
      // A derived table's output column is resolved, just not to a base
      // table; it must not reach the last-chance whole-schema pass.
      if (derived_output_matches(*s, name)) return;
    }
    std::string lowered = to_lower(name);
    for (const std::string& alias : info(scope).select_aliases) {
      if (alias == lowered) return;  // output alias, not a schema column
    }
    out_.unresolved.insert(name);
  }

  void expand_star(const SqlScope& scope, const std::string& qualifier) {
    if (qualifier.empty()) {
      for (const std::string& table : info(scope).base_tables) {
        const TableDef& def = *schema_.table(table);
        for (std::size_t c = 0; c < def.columns.size(); ++c) add_column(table, c);
      }
      return;
    }
    std::string key = to_lower(qualifier);
    for (const SqlScope* s = &scope; s != nullptr; s = s->parent) {
      auto it = info(*s).qualifiers.find(key);
      if (it == info(*s).qualifiers.end()) continue;
      if (it->second.empty()) return;
      const TableDef& def = *schema_.table(it->second);
      for (std::size_t c = 0; c < def.columns.size(); ++c) add_column(it->second, c);
      return;
    }
  }

  void walk(const SqlScope& scope) {
    for (const std::string& table : info(scope).base_tables) out_.tables.insert(table);
    for (const ColumnUse& use : scope.columns) {
      if (use.qualifier.empty()) {
        resolve_bare(scope, use.column);
      } else {
        resolve_qualified(scope, use);
      }
    }
    for (const std::string& star : scope.stars) expand_star(scope, star);
    for (const std::string& using_col : scope.using_columns) {
      bool attributed = false;
      for (const std::string& table : info(scope).base_tables) {
        if (auto col = schema_.table(table)->find_column(using_col)) {
          add_column(table, *col);
          attributed = true;
        }
      }
      if (!attributed) out_.unresolved.insert(using_col);
    }
    for (const auto& child : scope.children) walk(*child);
  }
};

}  // namespace

SqlReferenceSet extract_references(const std::string& sql, const DatabaseSchema& schema) {
  ParsedSql parsed = parse_sql(sql);
  SqlReferenceSet out;
  Resolver(schema, out).run(*parsed.root);
  return out;
}

LinkedSchema union_links(const std::vector<SqlReferenceSet>& refsets,
                         const DatabaseSchema& schema) {
  LinkedSchema out;
  for (const SqlReferenceSet& refs : refsets) {
    out.tables.insert(refs.tables.begin(), refs.tables.end());
    out.columns.insert(refs.columns.begin(), refs.columns.end());
  }
  for (const SqlReferenceSet& refs : refsets) {
    for (const std::string& name : refs.unresolved) {
      std::vector<std::pair<std::string, std::string>> owners;
      for (const TableDef& table : schema.tables) {
        if (auto col = table.find_column(name)) {
          owners.emplace_back(table.name, table.columns[*col].name);
        }
      }
      if (owners.size() == 1) {
        out.tables.insert(owners[0].first);
        out.columns.insert(owners[0]);
      }
    }
  }
  return out;
}

}  // namespace sqlens
