#include "sqlens/benchmark.hpp"

#include <fmt/format.h>

#include <fstream>

#include "sqlens/errors.hpp"

namespace sqlens {

const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    case Difficulty::hard: return "hard";
    case Difficulty::unknown: return "unknown";
  }
  return "unknown";
}

Difficulty difficulty_from_label(const std::string& label) {
  if (label == "easy" || label == "simple") return Difficulty::easy;
  if (label == "medium" || label == "moderate") return Difficulty::medium;
  if (label == "hard" || label == "challenging") return Difficulty::hard;
  return Difficulty::unknown;
}

namespace {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, fmt::format("cannot read {}", path.string()));
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_catalog, fmt::format("{}: {}", path.string(), e.what()));
  }
}

/// Position of one catalog column in the flat Spider index space. Index 0 is
/// usually the star placeholder, which owns no table.
struct FlatColumn {
  int table_index = -1;
  std::size_t column_index = 0;  // within the owning table
};

DatabaseSchema schema_from_catalog_entry(const nlohmann::json& entry) {
  DatabaseSchema schema;
  schema.db_id = entry.at("db_id").get<std::string>();

  const auto& table_names = entry.contains("table_names_original") ? entry.at("table_names_original")
                                                                   : entry.at("table_names");
  for (const auto& name : table_names) {
    TableDef t;
    t.name = name.get<std::string>();
    schema.tables.push_back(std::move(t));
  }

  const auto& column_names = entry.contains("column_names_original") ? entry.at("column_names_original")
                                                                     : entry.at("column_names");
  const auto& column_types = entry.at("column_types");
  if (column_types.size() != column_names.size()) {
    throw Error(Errc::malformed_catalog,
                fmt::format("{}: column_types length {} != column_names length {}", schema.db_id,
                            column_types.size(), column_names.size()));
  }

  std::vector<FlatColumn> flat(column_names.size());
  for (std::size_t i = 0; i < column_names.size(); ++i) {
    int table_index = column_names[i].at(0).get<int>();
    std::string name = column_names[i].at(1).get<std::string>();
    if (table_index < 0) continue;  // the star placeholder spans all tables
    if (static_cast<std::size_t>(table_index) >= schema.tables.size()) {
      throw Error(Errc::malformed_catalog,
                  fmt::format("{}: column {} names table index {}", schema.db_id, name, table_index));
    }
    TableDef& table = schema.tables[static_cast<std::size_t>(table_index)];
    flat[i].table_index = table_index;
    flat[i].column_index = table.columns.size();
    table.columns.push_back({name, column_types[i].get<std::string>(), false});
  }

  auto resolve = [&](std::size_t flat_index, const char* what) -> FlatColumn {
    if (flat_index >= flat.size() || flat[flat_index].table_index < 0) {
      throw Error(Errc::malformed_catalog,
                  fmt::format("{}: {} references column index {}", schema.db_id, what, flat_index));
    }
    return flat[flat_index];
  };

  if (entry.contains("primary_keys")) {
    for (const auto& pk : entry.at("primary_keys")) {
      // Spider encodes composite keys as nested arrays in newer dumps.
      if (pk.is_array()) {
        for (const auto& part : pk) {
          FlatColumn c = resolve(part.get<std::size_t>(), "primary_keys");
          schema.tables[c.table_index].columns[c.column_index].is_primary_key = true;
        }
      } else {
        FlatColumn c = resolve(pk.get<std::size_t>(), "primary_keys");
        schema.tables[c.table_index].columns[c.column_index].is_primary_key = true;
      }
    }
  }

  if (entry.contains("foreign_keys")) {
    for (const auto& fk : entry.at("foreign_keys")) {
      FlatColumn local = resolve(fk.at(0).get<std::size_t>(), "foreign_keys");
      FlatColumn foreign = resolve(fk.at(1).get<std::size_t>(), "foreign_keys");
      schema.tables[local.table_index].foreign_keys.push_back(
          {schema.tables[local.table_index].columns[local.column_index].name,
           schema.tables[foreign.table_index].name,
           schema.tables[foreign.table_index].columns[foreign.column_index].name});
    }
  }

  schema.cell_samples.resize(schema.tables.size());
  schema.validate();
  return schema;
}

std::filesystem::path find_question_file(const std::filesystem::path& root) {
  for (const char* name : {"dev.json", "train.json", "questions.json"}) {
    if (std::filesystem::exists(root / name)) return root / name;
  }
  throw Error(Errc::missing_file,
              fmt::format("no question file (dev.json, train.json, questions.json) under {}",
                          root.string()));
}

}  // namespace

BenchmarkSet load_benchmark(const std::filesystem::path& root, BenchmarkFormat format) {
  if (!std::filesystem::is_directory(root)) {
    throw Error(Errc::missing_file, fmt::format("benchmark root {} is not a directory", root.string()));
  }

  BenchmarkSet set;
  set.root = root;

  nlohmann::json catalog = read_json_file(root / "tables.json");
  if (!catalog.is_array()) {
    throw Error(Errc::malformed_catalog, "tables.json must be an array of database entries");
  }
  for (const auto& entry : catalog) {
    try {
      DatabaseSchema schema = schema_from_catalog_entry(entry);
      std::string db_id = schema.db_id;
      if (!set.catalog.emplace(db_id, std::move(schema)).second) {
        throw Error(Errc::malformed_catalog, fmt::format("duplicate db_id {}", db_id));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::malformed_catalog, fmt::format("tables.json: {}", e.what()));
    }
  }

  nlohmann::json questions = read_json_file(find_question_file(root));
  if (!questions.is_array()) {
    throw Error(Errc::unknown_format, "question file must be a JSON array");
  }
  std::size_t index = 0;
  for (const auto& q : questions) {
    BenchmarkItem item;
    item.item_id = fmt::format("item_{:04d}", index++);
    try {
      item.db_id = q.at("db_id").get<std::string>();
      item.question = q.at("question").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::unknown_format, fmt::format("question entry {}: {}", item.item_id, e.what()));
    }
    if (q.contains("query")) {
      item.gold_sql = q.at("query").get<std::string>();
    } else if (q.contains("SQL")) {
      item.gold_sql = q.at("SQL").get<std::string>();
    }
    if (q.contains("difficulty")) {
      item.difficulty = difficulty_from_label(q.at("difficulty").get<std::string>());
    }
    if (format == BenchmarkFormat::bird && q.contains("evidence")) {
      item.evidence = q.at("evidence").get<std::string>();
    }
    if (set.catalog.find(item.db_id) == set.catalog.end()) {
      throw Error(Errc::malformed_catalog,
                  fmt::format("{} references db_id {} absent from tables.json", item.item_id,
                              item.db_id));
    }
    if (!std::filesystem::exists(set.database_path(item.db_id))) {
      throw Error(Errc::missing_file,
                  fmt::format("database file missing for db_id {}", item.db_id));
    }
    set.items.push_back(std::move(item));
  }
  return set;
}

}  // namespace sqlens
