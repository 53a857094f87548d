#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sqlens/vendor_json.hpp"

namespace sqlens {

class Database;  // exec.hpp

struct ColumnDef {
  std::string name;
  std::string declared_type;
  bool is_primary_key = false;
};

struct ForeignKey {
  std::string local_column;
  std::string foreign_table;
  std::string foreign_column;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;
  std::vector<ForeignKey> foreign_keys;

  /// Case-insensitive column lookup; returns index or nullopt.
  std::optional<std::size_t> find_column(std::string_view column) const;
};

/// Full catalog description of one database plus optional sampled cell rows.
/// Immutable after construction; identifier comparison is case-insensitive
/// with original casing preserved.
struct DatabaseSchema {
  std::string db_id;
  std::vector<TableDef> tables;
  /// Per-table sampled rows, parallel to `tables`; each row has one rendered
  /// value per column.
  std::vector<std::vector<std::vector<std::string>>> cell_samples;

  std::optional<std::size_t> find_table(std::string_view table) const;
  const TableDef* table(std::string_view name) const;

  /// Throws MalformedCatalog when a structural invariant is violated
  /// (duplicate names, dangling foreign keys, ragged sample rows).
  void validate() const;
};

/// The linked subset of a schema: table names plus (table, column) pairs.
struct LinkedSchema {
  std::set<std::string> tables;                              // original casing
  std::set<std::pair<std::string, std::string>> columns;     // (table, column)

  bool empty() const { return tables.empty() && columns.empty(); }
};

/// Render the catalog as CREATE TABLE blocks in catalog order. Foreign keys
/// appear as comment lines naming both endpoints. When include_samples is
/// set, each table is followed by a block of its sampled rows.
std::string render_full_ddl(const DatabaseSchema& schema, bool include_samples);

/// Sample-rows text alone (the cell-value reference section of a prompt).
std::string render_cell_samples(const DatabaseSchema& schema);

/// Compact one-line form: `t1(c1:TYPE[v1,v2], c2:TYPE[v3]); t2(...)`.
std::string render_compact(const DatabaseSchema& schema, std::size_t values_per_column);

/// Structure recovered from the compact grammar (used by round-trip checks
/// and by the agent when it assembles schemas from exploration output).
struct CompactEntry {
  std::string table;
  std::vector<std::pair<std::string, std::string>> columns;  // (name, type)
};
std::vector<CompactEntry> parse_compact(const std::string& text);

/// Restrict a schema to the linked tables/columns. Primary-key columns of
/// surviving tables are retained, as are foreign-key columns whose endpoints
/// both survive. Throws EmptyLink on an empty link set.
DatabaseSchema prune(const DatabaseSchema& schema, const LinkedSchema& linked);

/// Fetch up to rows_per_table sampled rows for every table, deterministic in
/// the seed. Stores rendered values into schema.cell_samples.
void sample_cells(Database& db, DatabaseSchema& schema, std::size_t rows_per_table,
                  std::uint64_t seed);

nlohmann::json schema_to_json(const DatabaseSchema& schema);
DatabaseSchema schema_from_json(const nlohmann::json& j);

}  // namespace sqlens
