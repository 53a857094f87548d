#pragma once

#include <filesystem>
#include <string>

#include "sqlens/schema.hpp"

namespace sqlens::test {

// Root of this process's scratch fixtures; created on first use and removed
// at exit. Unique per process so parallel test binaries never collide.
std::filesystem::path fixture_root();

// Path to one of the three fixture databases ("concert_singer", "library",
// "shop"), creating and populating it on first request.
std::filesystem::path fixture_db(const std::string& db_id);

// Creates an ad-hoc database under fixture_root() by running a SQL script
// on a fresh writable connection. Re-running with the same filename reuses
// the existing file.
std::filesystem::path make_db(const std::string& filename, const char* script);

// Catalog descriptions matching the fixture databases byte for byte
// (table order, column order, declared types, keys).
DatabaseSchema concert_singer_schema();
DatabaseSchema library_schema();
DatabaseSchema shop_schema();
DatabaseSchema schema_for(const std::string& db_id);

// Writes a Spider-format benchmark directory (tables.json, questions file,
// database/<db>/<db>.sqlite) covering all three fixture databases with
// `questions` entries; returns the benchmark root.
std::filesystem::path write_benchmark_dir(const std::string& name);

}  // namespace sqlens::test
