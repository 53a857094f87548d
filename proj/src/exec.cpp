#include "sqlens/exec.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cstring>

#include "sqlens/errors.hpp"
#include "sqlens/hash.hpp"
#include "sqlens/sql_parser.hpp"
#include "sqlens/strings.hpp"

namespace sqlens {

const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Syntax: return "SyntaxError";
    case ErrorKind::TableNotFound: return "TableNotFound";
    case ErrorKind::ColumnNotFound: return "ColumnNotFound";
    case ErrorKind::TypeMismatch: return "TypeMismatch";
    case ErrorKind::AmbiguousColumn: return "AmbiguousColumn";
    case ErrorKind::Timeout: return "TimeoutError";
    case ErrorKind::NoResult: return "NoResult";
    case ErrorKind::Other: return "OtherError";
  }
  return "OtherError";
}

ErrorKind error_kind_from_name(const std::string& name) {
  for (ErrorKind k : {ErrorKind::Syntax, ErrorKind::TableNotFound, ErrorKind::ColumnNotFound,
                      ErrorKind::TypeMismatch, ErrorKind::AmbiguousColumn, ErrorKind::Timeout,
                      ErrorKind::NoResult, ErrorKind::Other}) {
    if (name == error_kind_name(k)) return k;
  }
  return ErrorKind::Other;
}

ErrorKind classify_error(const std::string& message, bool empty_result) {
  if (message.empty() && empty_result) return ErrorKind::NoResult;
  std::string m = to_lower(message);
  auto has = [&](const char* needle) { return m.find(needle) != std::string::npos; };
  if (has("syntax error") || has("incomplete input")) return ErrorKind::Syntax;
  if (has("no such table")) return ErrorKind::TableNotFound;
  if (has("no such column")) return ErrorKind::ColumnNotFound;
  if (has("ambiguous column")) return ErrorKind::AmbiguousColumn;
  if (has("datatype mismatch") || has("type mismatch")) return ErrorKind::TypeMismatch;
  if (has("interrupted") || has("query timed out")) return ErrorKind::Timeout;
  return ErrorKind::Other;
}

ExecResult ExecResult::make_error(ErrorKind kind, std::string message) {
  ExecResult r;
  r.outcome = Outcome::error;
  r.error_kind = kind;
  r.error_message = std::move(message);
  return r;
}

nlohmann::json exec_result_to_json(const ExecResult& r) {
  nlohmann::json j;
  if (r.ok_rows()) {
    j["outcome"] = "rows";
    j["columns"] = r.columns;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
      nlohmann::json jr = nlohmann::json::array();
      for (const auto& v : row) jr.push_back(value_to_json(v));
      rows.push_back(std::move(jr));
    }
    j["rows"] = std::move(rows);
    if (r.truncated) j["truncated"] = true;
  } else {
    j["outcome"] = "error";
    j["error_kind"] = error_kind_name(r.error_kind);
    j["error_message"] = r.error_message;
  }
  j["elapsed_ms"] = r.elapsed.count();
  return j;
}

ExecResult exec_result_from_json(const nlohmann::json& j) {
  ExecResult r;
  if (j.value("outcome", "error") == "rows") {
    r.outcome = ExecResult::Outcome::rows;
    r.columns = j.value("columns", std::vector<std::string>{});
    for (const auto& jr : j.value("rows", nlohmann::json::array())) {
      std::vector<Value> row;
      for (const auto& v : jr) row.push_back(value_from_json(v));
      r.rows.push_back(std::move(row));
    }
    r.truncated = j.value("truncated", false);
  } else {
    r.outcome = ExecResult::Outcome::error;
    r.error_kind = error_kind_from_name(j.value("error_kind", "OtherError"));
    r.error_message = j.value("error_message", "");
  }
  r.elapsed = std::chrono::milliseconds(j.value("elapsed_ms", 0));
  return r;
}

namespace {

struct ProgressState {
  std::chrono::steady_clock::time_point deadline;
  bool timed_out = false;
};

int progress_callback(void* ctx) {
  auto* state = static_cast<ProgressState*>(ctx);
  if (std::chrono::steady_clock::now() >= state->deadline) {
    state->timed_out = true;
    return 1;  // interrupt
  }
  return 0;
}

struct AuthState {
  std::set<std::string>* trace = nullptr;
};

int authorizer(void* ctx, int action, const char* a1, const char* /*a2*/, const char* /*a3*/,
               const char* /*a4*/) {
  auto* state = static_cast<AuthState*>(ctx);
  switch (action) {
    case SQLITE_SELECT:
    case SQLITE_FUNCTION:
    case SQLITE_RECURSIVE:
      return SQLITE_OK;
    case SQLITE_READ:
      if (state->trace && a1 && std::strncmp(a1, "sqlite_", 7) != 0) {
        state->trace->insert(a1);
      }
      return SQLITE_OK;
    default:
      // Everything else (insert, update, delete, DDL, pragma, attach,
      // transactions) is denied: this connection is a query sandbox.
      return SQLITE_DENY;
  }
}

/// Names of the connection's real tables. Runs with no authorizer installed;
/// the schema cannot change underneath because this connection denies DDL.
std::set<std::string> base_table_names(sqlite3* db) {
  std::set<std::string> names;
  sqlite3_stmt* stmt = nullptr;
  if (sqlite3_prepare_v2(db, "SELECT name FROM sqlite_master WHERE type = 'table'", -1, &stmt,
                         nullptr) != SQLITE_OK) {
    return names;
  }
  while (sqlite3_step(stmt) == SQLITE_ROW) {
    const unsigned char* name = sqlite3_column_text(stmt, 0);
    if (name) names.emplace(reinterpret_cast<const char*>(name));
  }
  sqlite3_finalize(stmt);
  return names;
}

Value column_value(sqlite3_stmt* stmt, int col) {
  switch (sqlite3_column_type(stmt, col)) {
    case SQLITE_NULL:
      return Value::null();
    case SQLITE_INTEGER:
      return Value::integer(sqlite3_column_int64(stmt, col));
    case SQLITE_FLOAT:
      return Value::real(sqlite3_column_double(stmt, col));
    case SQLITE_TEXT: {
      const unsigned char* p = sqlite3_column_text(stmt, col);
      int n = sqlite3_column_bytes(stmt, col);
      return Value::str(std::string(reinterpret_cast<const char*>(p), static_cast<size_t>(n)));
    }
    case SQLITE_BLOB: {
      const void* p = sqlite3_column_blob(stmt, col);
      int n = sqlite3_column_bytes(stmt, col);
      return Value::blob(std::string(static_cast<const char*>(p), static_cast<size_t>(n)));
    }
  }
  return Value::null();
}

}  // namespace

Database::Database(const std::string& path) : path_(path) {
  int rc = sqlite3_open_v2(path.c_str(), &db_, SQLITE_OPEN_READONLY, nullptr);
  if (rc != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "cannot open database";
    if (db_) sqlite3_close(db_);
    db_ = nullptr;
    throw Error(Errc::database_unreachable, path + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 2000);
}

Database::~Database() {
  if (db_) sqlite3_close(db_);
}

Database::Database(Database&& other) noexcept : db_(other.db_), path_(std::move(other.path_)) {
  other.db_ = nullptr;
}

Database& Database::operator=(Database&& other) noexcept {
  if (this != &other) {
    if (db_) sqlite3_close(db_);
    db_ = other.db_;
    path_ = std::move(other.path_);
    other.db_ = nullptr;
  }
  return *this;
}

ExecResult Database::execute(const std::string& sql, const ExecOptions& options) {
  auto started = std::chrono::steady_clock::now();
  // The authorizer sees every read by name, including transient objects such
  // as CTEs. Raw reads are intersected with the schema's real tables on the
  // way out so the trace holds base tables only.
  std::set<std::string> raw_reads;
  auto finish = [&](ExecResult r) {
    r.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    if (options.table_trace && db_ && !raw_reads.empty()) {
      std::set<std::string> base = base_table_names(db_);
      for (const std::string& name : raw_reads) {
        if (base.contains(name)) options.table_trace->insert(name);
      }
    }
    return r;
  };
  if (!db_) return finish(ExecResult::make_error(ErrorKind::Other, "database closed"));

  AuthState auth{options.table_trace ? &raw_reads : nullptr};
  sqlite3_set_authorizer(db_, authorizer, &auth);
  ProgressState progress{started + options.timeout, false};
  sqlite3_progress_handler(db_, 500, progress_callback, &progress);

  sqlite3_stmt* stmt = nullptr;
  int rc = sqlite3_prepare_v2(db_, sql.c_str(), -1, &stmt, nullptr);
  ExecResult result;
  if (rc != SQLITE_OK || stmt == nullptr) {
    std::string msg = sqlite3_errmsg(db_);
    sqlite3_set_authorizer(db_, nullptr, nullptr);
    sqlite3_progress_handler(db_, 0, nullptr, nullptr);
    if (stmt) sqlite3_finalize(stmt);
    ErrorKind kind = progress.timed_out ? ErrorKind::Timeout : classify_error(msg, false);
    return finish(ExecResult::make_error(kind, msg));
  }

  int ncols = sqlite3_column_count(stmt);
  for (int c = 0; c < ncols; ++c) {
    const char* name = sqlite3_column_name(stmt, c);
    result.columns.push_back(name ? name : "");
  }

  while (true) {
    rc = sqlite3_step(stmt);
    if (rc == SQLITE_ROW) {
      if (result.rows.size() >= options.max_rows) {
        result.truncated = true;
        break;
      }
      std::vector<Value> row;
      row.reserve(static_cast<size_t>(ncols));
      for (int c = 0; c < ncols; ++c) row.push_back(column_value(stmt, c));
      result.rows.push_back(std::move(row));
    } else if (rc == SQLITE_DONE) {
      break;
    } else {
      std::string msg = sqlite3_errmsg(db_);
      sqlite3_finalize(stmt);
      sqlite3_set_authorizer(db_, nullptr, nullptr);
      sqlite3_progress_handler(db_, 0, nullptr, nullptr);
      ErrorKind kind = progress.timed_out ? ErrorKind::Timeout : classify_error(msg, false);
      return finish(ExecResult::make_error(kind, msg));
    }
  }

  sqlite3_finalize(stmt);
  sqlite3_set_authorizer(db_, nullptr, nullptr);
  sqlite3_progress_handler(db_, 0, nullptr, nullptr);
  result.outcome = ExecResult::Outcome::rows;
  return finish(result);
}

bool order_sensitive_for_gold(const std::string& gold_sql) {
  try {
    ParsedSql parsed = parse_sql(gold_sql);
    return parsed.top_level_order_by;
  } catch (const Error&) {
    // Fall back to a paren-depth-0 token scan.
    std::string lowered = to_lower(gold_sql);
    int depth = 0;
    for (std::size_t i = 0; i + 5 < lowered.size(); ++i) {
      char c = lowered[i];
      if (c == '(') ++depth;
      else if (c == ')') --depth;
      else if (depth == 0 && lowered.compare(i, 5, "order") == 0) {
        bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(lowered[i - 1]));
        bool right_ok = !std::isalnum(static_cast<unsigned char>(lowered[i + 5]));
        if (left_ok && right_ok) return true;
      }
    }
    return false;
  }
}

namespace {

std::string canonical_row(const std::vector<Value>& row) {
  std::string out;
  for (const auto& v : row) {
    out += canonical_encoding(normalize_value(v));
    out.push_back('\x1f');
  }
  return out;
}

std::vector<std::string> canonical_rows(const ExecResult& r, bool order_sensitive) {
  std::vector<std::string> rows;
  rows.reserve(r.rows.size());
  for (const auto& row : r.rows) rows.push_back(canonical_row(row));
  if (!order_sensitive) std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

bool execution_match(const ExecResult& predicted, const ExecResult& gold, bool order_sensitive) {
  if (!predicted.ok_rows() || !gold.ok_rows()) return false;
  if (predicted.columns.size() != gold.columns.size()) return false;
  return canonical_rows(predicted, order_sensitive) == canonical_rows(gold, order_sensitive);
}

std::string fingerprint(const ExecResult& result, bool order_sensitive) {
  if (!result.ok_rows()) throw Error(Errc::not_rows, "fingerprint requires a rows outcome");
  std::string blob = "cols=" + std::to_string(result.columns.size()) + ";";
  for (const auto& row : canonical_rows(result, order_sensitive)) {
    blob += row;
    blob.push_back('\x1e');
  }
  return sha256_hex(blob);
}

}  // namespace sqlens
