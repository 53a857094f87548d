#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sqlens/schema.hpp"

namespace sqlens {

enum class Difficulty { easy, medium, hard, unknown };

const char* difficulty_name(Difficulty d);
/// Accepts both naming schemes ("easy"/"medium"/"hard" and
/// "simple"/"moderate"/"challenging"); anything else is unknown.
Difficulty difficulty_from_label(const std::string& label);

struct BenchmarkItem {
  std::string item_id;
  std::string db_id;
  std::string question;
  std::optional<std::string> gold_sql;  // absent in unsupervised sets
  Difficulty difficulty = Difficulty::unknown;
  std::string evidence;  // domain hint, empty when the source has none
};

enum class BenchmarkFormat { spider, bird };

struct BenchmarkSet {
  std::filesystem::path root;
  std::vector<BenchmarkItem> items;
  std::map<std::string, DatabaseSchema> catalog;  // keyed by db_id

  /// Conventional location of one database file.
  std::filesystem::path database_path(const std::string& db_id) const {
    return root / "database" / db_id / (db_id + ".sqlite");
  }
};

/// Loads a benchmark directory: a tables.json catalog plus one question file
/// (dev.json, train.json, or questions.json). Loading is deterministic and
/// validates the catalog: star placeholder entries are skipped, every key
/// reference must land on a real column, and every referenced database file
/// must exist. Throws MissingFile, MalformedCatalog, or UnknownFormat.
BenchmarkSet load_benchmark(const std::filesystem::path& root, BenchmarkFormat format);

}  // namespace sqlens
