#include "sqlens/schema.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "sqlens/errors.hpp"
#include "sqlens/strings.hpp"

namespace sqlens {

std::optional<std::size_t> TableDef::find_column(std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (iequals(columns[i].name, column)) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> DatabaseSchema::find_table(std::string_view name) const {
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (iequals(tables[i].name, name)) return i;
  }
  return std::nullopt;
}

const TableDef* DatabaseSchema::table(std::string_view name) const {
  auto idx = find_table(name);
  return idx ? &tables[*idx] : nullptr;
}

void DatabaseSchema::validate() const {
  std::set<std::string> seen_tables;
  for (const auto& t : tables) {
    if (!seen_tables.insert(to_lower(t.name)).second) {
      throw Error(Errc::malformed_catalog, "duplicate table name: " + t.name);
    }
    std::set<std::string> seen_cols;
    for (const auto& c : t.columns) {
      if (!seen_cols.insert(to_lower(c.name)).second) {
        throw Error(Errc::malformed_catalog, "duplicate column " + t.name + "." + c.name);
      }
    }
    for (const auto& fk : t.foreign_keys) {
      if (!t.find_column(fk.local_column)) {
        throw Error(Errc::malformed_catalog,
                    "foreign key local column missing: " + t.name + "." + fk.local_column);
      }
      const TableDef* ft = table(fk.foreign_table);
      if (!ft || !ft->find_column(fk.foreign_column)) {
        throw Error(Errc::malformed_catalog, "dangling foreign key " + t.name + "." +
                                                 fk.local_column + " -> " + fk.foreign_table +
                                                 "." + fk.foreign_column);
      }
    }
  }
  if (!cell_samples.empty()) {
    if (cell_samples.size() != tables.size()) {
      throw Error(Errc::malformed_catalog, "cell_samples not parallel to tables");
    }
    for (std::size_t i = 0; i < tables.size(); ++i) {
      for (const auto& row : cell_samples[i]) {
        if (row.size() != tables[i].columns.size()) {
          throw Error(Errc::malformed_catalog,
                      "sample row arity mismatch in table " + tables[i].name);
        }
      }
    }
  }
}

static std::string render_table_samples_block(const DatabaseSchema& schema,
                                              std::size_t table_index);

std::string render_full_ddl(const DatabaseSchema& schema, bool include_samples) {
  std::ostringstream out;
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const TableDef& t = schema.tables[ti];
    out << "CREATE TABLE " << t.name << " (\n";
    std::vector<std::string> pk_cols;
    for (const auto& c : t.columns) {
      if (c.is_primary_key) pk_cols.push_back(c.name);
    }
    for (std::size_t ci = 0; ci < t.columns.size(); ++ci) {
      const ColumnDef& c = t.columns[ci];
      out << "  " << c.name;
      if (!c.declared_type.empty()) out << " " << c.declared_type;
      if (c.is_primary_key && pk_cols.size() == 1) out << " PRIMARY KEY";
      if (ci + 1 < t.columns.size() || pk_cols.size() > 1) out << ",";
      out << "\n";
    }
    if (pk_cols.size() > 1) {
      out << "  PRIMARY KEY (";
      for (std::size_t i = 0; i < pk_cols.size(); ++i) {
        if (i) out << ", ";
        out << pk_cols[i];
      }
      out << ")\n";
    }
    out << ");\n";
    for (const auto& fk : t.foreign_keys) {
      out << "-- " << t.name << "." << fk.local_column << " REFERENCES " << fk.foreign_table
          << "." << fk.foreign_column << "\n";
    }
    if (include_samples && ti < schema.cell_samples.size() &&
        !schema.cell_samples[ti].empty()) {
      out << render_table_samples_block(schema, ti);
    }
    if (ti + 1 < schema.tables.size()) out << "\n";
  }
  return out.str();
}

static std::string render_table_samples_block(const DatabaseSchema& schema,
                                              std::size_t table_index) {
  const TableDef& t = schema.tables[table_index];
  const auto& rows = schema.cell_samples[table_index];
  std::ostringstream out;
  out << "/* Sample rows from " << t.name << ":\n";
  for (std::size_t ci = 0; ci < t.columns.size(); ++ci) {
    if (ci) out << " | ";
    out << t.columns[ci].name;
  }
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t ci = 0; ci < row.size(); ++ci) {
      if (ci) out << " | ";
      out << row[ci];
    }
    out << "\n";
  }
  out << "*/\n";
  return out.str();
}

std::string render_cell_samples(const DatabaseSchema& schema) {
  std::ostringstream out;
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    if (ti >= schema.cell_samples.size() || schema.cell_samples[ti].empty()) continue;
    out << render_table_samples_block(schema, ti);
  }
  return out.str();
}

std::string render_compact(const DatabaseSchema& schema, std::size_t values_per_column) {
  std::ostringstream out;
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const TableDef& t = schema.tables[ti];
    if (ti) out << "; ";
    out << t.name << "(";
    for (std::size_t ci = 0; ci < t.columns.size(); ++ci) {
      if (ci) out << ", ";
      out << t.columns[ci].name << ":" << t.columns[ci].declared_type << "[";
      std::size_t emitted = 0;
      if (ti < schema.cell_samples.size()) {
        for (const auto& row : schema.cell_samples[ti]) {
          if (emitted >= values_per_column) break;
          if (ci < row.size()) {
            if (emitted) out << ",";
            out << row[ci];
            ++emitted;
          }
        }
      }
      out << "]";
    }
    out << ")";
  }
  return out.str();
}

std::vector<CompactEntry> parse_compact(const std::string& text) {
  std::vector<CompactEntry> entries;
  std::size_t i = 0;
  auto skip_ws = [&] { while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i; };
  while (true) {
    skip_ws();
    if (i >= text.size()) break;
    CompactEntry entry;
    std::size_t start = i;
    while (i < text.size() && text[i] != '(') ++i;
    if (i >= text.size()) break;
    entry.table = trim(text.substr(start, i - start));
    ++i;  // '('
    while (i < text.size() && text[i] != ')') {
      skip_ws();
      std::size_t cs = i;
      while (i < text.size() && text[i] != ':' && text[i] != ')' && text[i] != ',') ++i;
      std::string col = trim(text.substr(cs, i - cs));
      std::string type;
      if (i < text.size() && text[i] == ':') {
        ++i;
        std::size_t ts = i;
        while (i < text.size() && text[i] != '[' && text[i] != ',' && text[i] != ')') ++i;
        type = trim(text.substr(ts, i - ts));
        if (i < text.size() && text[i] == '[') {
          // skip the value list
          while (i < text.size() && text[i] != ']') ++i;
          if (i < text.size()) ++i;
        }
      }
      if (!col.empty()) entry.columns.emplace_back(col, type);
      skip_ws();
      if (i < text.size() && text[i] == ',') ++i;
    }
    if (i < text.size()) ++i;  // ')'
    if (!entry.table.empty()) entries.push_back(std::move(entry));
    skip_ws();
    if (i < text.size() && text[i] == ';') ++i;
  }
  return entries;
}

DatabaseSchema prune(const DatabaseSchema& schema, const LinkedSchema& linked) {
  if (linked.empty()) throw Error(Errc::empty_link, "link set is empty");

  // Normalize the link to lowercase lookup sets. Column links imply their table.
  std::set<std::string> keep_tables;
  std::set<std::pair<std::string, std::string>> keep_columns;
  for (const auto& t : linked.tables) keep_tables.insert(to_lower(t));
  for (const auto& [t, c] : linked.columns) {
    keep_tables.insert(to_lower(t));
    keep_columns.insert({to_lower(t), to_lower(c)});
  }

  // Foreign-key columns survive when both endpoint tables survive.
  for (const auto& t : schema.tables) {
    if (!keep_tables.count(to_lower(t.name))) continue;
    for (const auto& fk : t.foreign_keys) {
      if (keep_tables.count(to_lower(fk.foreign_table))) {
        keep_columns.insert({to_lower(t.name), to_lower(fk.local_column)});
        keep_columns.insert({to_lower(fk.foreign_table), to_lower(fk.foreign_column)});
      }
    }
  }

  DatabaseSchema out;
  out.db_id = schema.db_id;
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const TableDef& t = schema.tables[ti];
    std::string tl = to_lower(t.name);
    if (!keep_tables.count(tl)) continue;

    TableDef nt;
    nt.name = t.name;
    std::vector<std::size_t> kept_idx;
    for (std::size_t ci = 0; ci < t.columns.size(); ++ci) {
      const ColumnDef& c = t.columns[ci];
      bool keep = c.is_primary_key || keep_columns.count({tl, to_lower(c.name)}) > 0;
      if (keep) {
        nt.columns.push_back(c);
        kept_idx.push_back(ci);
      }
    }
    for (const auto& fk : t.foreign_keys) {
      bool local_kept = nt.find_column(fk.local_column).has_value();
      bool foreign_table_kept = keep_tables.count(to_lower(fk.foreign_table)) > 0;
      if (local_kept && foreign_table_kept) nt.foreign_keys.push_back(fk);
    }
    out.tables.push_back(std::move(nt));

    if (ti < schema.cell_samples.size()) {
      std::vector<std::vector<std::string>> rows;
      for (const auto& row : schema.cell_samples[ti]) {
        std::vector<std::string> nr;
        for (std::size_t ci : kept_idx) {
          if (ci < row.size()) nr.push_back(row[ci]);
        }
        rows.push_back(std::move(nr));
      }
      out.cell_samples.push_back(std::move(rows));
    } else {
      out.cell_samples.emplace_back();
    }
  }
  out.validate();
  return out;
}

nlohmann::json schema_to_json(const DatabaseSchema& schema) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : schema.tables) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : t.columns) {
      cols.push_back({{"name", c.name}, {"type", c.declared_type}, {"pk", c.is_primary_key}});
    }
    nlohmann::json fks = nlohmann::json::array();
    for (const auto& fk : t.foreign_keys) {
      fks.push_back({{"column", fk.local_column},
                     {"ref_table", fk.foreign_table},
                     {"ref_column", fk.foreign_column}});
    }
    tables.push_back({{"name", t.name}, {"columns", cols}, {"foreign_keys", fks}});
  }
  return {{"db_id", schema.db_id}, {"tables", tables}, {"cell_samples", schema.cell_samples}};
}

DatabaseSchema schema_from_json(const nlohmann::json& j) {
  DatabaseSchema out;
  out.db_id = j.value("db_id", "");
  for (const auto& tj : j.value("tables", nlohmann::json::array())) {
    TableDef t;
    t.name = tj.value("name", "");
    for (const auto& cj : tj.value("columns", nlohmann::json::array())) {
      t.columns.push_back(
          {cj.value("name", ""), cj.value("type", ""), cj.value("pk", false)});
    }
    for (const auto& fj : tj.value("foreign_keys", nlohmann::json::array())) {
      t.foreign_keys.push_back({fj.value("column", ""), fj.value("ref_table", ""),
                                fj.value("ref_column", "")});
    }
    out.tables.push_back(std::move(t));
  }
  if (j.contains("cell_samples")) {
    out.cell_samples =
        j["cell_samples"].get<std::vector<std::vector<std::vector<std::string>>>>();
  }
  return out;
}

}  // namespace sqlens
