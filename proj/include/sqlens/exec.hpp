#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sqlens/values.hpp"
#include "sqlens/vendor_json.hpp"

struct sqlite3;

namespace sqlens {

enum class ErrorKind {
  Syntax,
  TableNotFound,
  ColumnNotFound,
  TypeMismatch,
  AmbiguousColumn,
  Timeout,
  NoResult,
  Other,
};

const char* error_kind_name(ErrorKind k);         // taxonomy display names
ErrorKind error_kind_from_name(const std::string& name);

/// Classify an engine error message (or an empty-but-successful execution)
/// into the taxonomy. Total: unmatched messages map to Other.
ErrorKind classify_error(const std::string& message, bool empty_result);

/// Outcome of executing one SQL statement.
struct ExecResult {
  enum class Outcome { rows, error };

  Outcome outcome = Outcome::error;
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;
  ErrorKind error_kind = ErrorKind::Other;
  std::string error_message;
  std::chrono::milliseconds elapsed{0};
  bool truncated = false;  // row cap hit

  bool ok_rows() const { return outcome == Outcome::rows; }
  bool empty_rows() const { return ok_rows() && rows.empty(); }
  /// Refinement trigger set: engine error or empty result.
  bool failed_or_empty() const { return !ok_rows() || rows.empty(); }

  static ExecResult make_error(ErrorKind kind, std::string message);
};

nlohmann::json exec_result_to_json(const ExecResult& r);
ExecResult exec_result_from_json(const nlohmann::json& j);

struct ExecOptions {
  std::chrono::milliseconds timeout{30'000};
  std::size_t max_rows = 1'000'000;
  /// When set, base tables read during execution are recorded here
  /// (engine-authorizer trace; internal sqlite_* tables and transient names
  /// such as CTEs are excluded).
  std::set<std::string>* table_trace = nullptr;
};

/// Read-only connection to a SQLite database file. Write statements are
/// rejected by an engine-level authorizer; long-running queries are
/// interrupted via a progress handler. One connection serves one in-flight
/// query at a time.
class Database {
 public:
  /// Throws DatabaseUnreachable when the file cannot be opened.
  explicit Database(const std::string& path);
  ~Database();

  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;
  Database(Database&&) noexcept;
  Database& operator=(Database&&) noexcept;

  /// Execute a statement. All failures are expressed in the ExecResult;
  /// nothing escapes as an exception.
  ExecResult execute(const std::string& sql, const ExecOptions& options = {});

  const std::string& path() const { return path_; }

 private:
  struct Guard;
  sqlite3* db_ = nullptr;
  std::string path_;
};

/// True iff the gold SQL carries a top-level ORDER BY (the EX order rule).
bool order_sensitive_for_gold(const std::string& gold_sql);

/// Execution-accuracy match: same column count and equal normalized row
/// multisets (or sequences when order_sensitive). Any error outcome fails.
bool execution_match(const ExecResult& predicted, const ExecResult& gold, bool order_sensitive);

/// Stable digest of a rows outcome such that equal fingerprints correspond to
/// execution_match under the same order flag. Throws NotRows on errors.
std::string fingerprint(const ExecResult& result, bool order_sensitive);

}  // namespace sqlens
