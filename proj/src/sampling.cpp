#include <fmt/format.h>

#include "sqlens/exec.hpp"
#include "sqlens/schema.hpp"
#include "sqlens/strings.hpp"

namespace sqlens {
namespace {

std::string quote_ident(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    out.push_back(c);
    if (c == '"') out.push_back('"');
  }
  out.push_back('"');
  return out;
}

}  // namespace

void sample_cells(Database& db, DatabaseSchema& schema, std::size_t rows_per_table,
                  std::uint64_t seed) {
  schema.cell_samples.assign(schema.tables.size(), {});
  ExecOptions options;
  for (std::size_t t = 0; t < schema.tables.size(); ++t) {
    const TableDef& table = schema.tables[t];

    std::size_t total = 0;
    ExecResult count = db.execute(fmt::format("SELECT count(*) FROM {}", quote_ident(table.name)),
                                  options);
    if (count.ok_rows() && !count.rows.empty() && count.rows[0][0].kind == Value::Kind::integer) {
      total = static_cast<std::size_t>(count.rows[0][0].as_int);
    }

    // The seed selects a window into the rowid order, so different seeds see
    // different rows while one seed always sees the same bytes.
    std::size_t offset = 0;
    if (total > rows_per_table) offset = seed % (total - rows_per_table + 1);

    std::string cols;
    for (const ColumnDef& col : table.columns) {
      if (!cols.empty()) cols += ", ";
      cols += quote_ident(col.name);
    }
    std::string sql = fmt::format("SELECT {} FROM {} ORDER BY rowid LIMIT {} OFFSET {}", cols,
                                  quote_ident(table.name), rows_per_table, offset);
    ExecResult rows = db.execute(sql, options);
    if (!rows.ok_rows()) {
      // WITHOUT ROWID tables: fall back to the engine's natural order.
      sql = fmt::format("SELECT {} FROM {} LIMIT {} OFFSET {}", cols, quote_ident(table.name),
                        rows_per_table, offset);
      rows = db.execute(sql, options);
    }
    if (!rows.ok_rows()) continue;

    for (const auto& row : rows.rows) {
      std::vector<std::string> rendered;
      rendered.reserve(row.size());
      for (const Value& v : row) rendered.push_back(render_value(v));
      schema.cell_samples[t].push_back(std::move(rendered));
    }
  }
}

}  // namespace sqlens
