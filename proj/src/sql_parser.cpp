#include "sqlens/sql_parser.hpp"

#include <cctype>
#include <unordered_set>

#include "sqlens/errors.hpp"
#include "sqlens/strings.hpp"

namespace sqlens {
namespace {

enum class TokKind { ident, quoted_ident, string, number, punct, end };

struct Token {
  TokKind kind = TokKind::end;
  std::string text;
};

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

std::vector<Token> tokenize(const std::string& sql) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = sql.size();
  while (i < n) {
    char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
      while (i < n && sql[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
      i += 2;
      while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
      i = (i + 1 < n) ? i + 2 : n;
      continue;
    }
    if (c == '\'') {
      std::string text;
      ++i;
      while (i < n) {
        if (sql[i] == '\'') {
          if (i + 1 < n && sql[i + 1] == '\'') {
            text.push_back('\'');
            i += 2;
          } else {
            ++i;
            break;
          }
        } else {
          text.push_back(sql[i++]);
        }
      }
      out.push_back({TokKind::string, std::move(text)});
      continue;
    }
    if (c == '"' || c == '`' || c == '[') {
      char close = c == '[' ? ']' : c;
      std::string text;
      ++i;
      while (i < n) {
        if (sql[i] == close) {
          if (close != ']' && i + 1 < n && sql[i + 1] == close) {
            text.push_back(close);
            i += 2;
          } else {
            ++i;
            break;
          }
        } else {
          text.push_back(sql[i++]);
        }
      }
      out.push_back({TokKind::quoted_ident, std::move(text)});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
      std::size_t start = i;
      if (c == '0' && i + 1 < n && (sql[i + 1] == 'x' || sql[i + 1] == 'X')) {
        i += 2;
        while (i < n && std::isxdigit(static_cast<unsigned char>(sql[i]))) ++i;
      } else {
        while (i < n && (std::isdigit(static_cast<unsigned char>(sql[i])) || sql[i] == '.')) ++i;
        if (i < n && (sql[i] == 'e' || sql[i] == 'E')) {
          ++i;
          if (i < n && (sql[i] == '+' || sql[i] == '-')) ++i;
          while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
        }
      }
      out.push_back({TokKind::number, sql.substr(start, i - start)});
      continue;
    }
    if (ident_start(c)) {
      std::size_t start = i;
      while (i < n && ident_char(sql[i])) ++i;
      out.push_back({TokKind::ident, sql.substr(start, i - start)});
      continue;
    }
    // Bound parameters (:name, @name, $name, ?N) carry no schema references.
    if ((c == ':' || c == '@' || c == '$') && i + 1 < n && ident_start(sql[i + 1])) {
      ++i;
      while (i < n && ident_char(sql[i])) ++i;
      out.push_back({TokKind::string, ""});
      continue;
    }
    if (c == '?') {
      ++i;
      while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
      out.push_back({TokKind::string, ""});
      continue;
    }
    static const char* two_char[] = {"<>", "<=", ">=", "==", "!=", "||", "<<", ">>", "->"};
    bool matched = false;
    for (const char* op : two_char) {
      if (i + 1 < n && sql[i] == op[0] && sql[i + 1] == op[1]) {
        if (op[0] == '-' && op[1] == '>' && i + 2 < n && sql[i + 2] == '>') {
          out.push_back({TokKind::punct, "->>"});
          i += 3;
        } else {
          out.push_back({TokKind::punct, op});
          i += 2;
        }
        matched = true;
        break;
      }
    }
    if (matched) continue;
    out.push_back({TokKind::punct, std::string(1, c)});
    ++i;
  }
  out.push_back({TokKind::end, ""});
  return out;
}

const std::unordered_set<std::string>& keyword_set() {
  static const std::unordered_set<std::string> kw = {
      "abort", "action", "add", "after", "all", "alter", "analyze", "and", "as", "asc",
      "attach", "autoincrement", "before", "begin", "between", "by", "cascade", "case",
      "cast", "check", "collate", "column", "commit", "conflict", "constraint", "create",
      "cross", "current", "current_date", "current_time", "current_timestamp", "database",
      "default", "deferrable", "deferred", "delete", "desc", "detach", "distinct", "do",
      "drop", "each", "else", "end", "escape", "except", "exclude", "exclusive", "exists",
      "explain", "fail", "false", "filter", "following", "for", "foreign", "from", "full",
      "generated", "glob", "group", "groups", "having", "if", "ignore", "immediate", "in",
      "index", "indexed", "initially", "inner", "insert", "instead", "intersect", "into",
      "is", "isnull", "join", "key", "left", "like", "limit", "match", "materialized",
      "natural", "no", "not", "nothing", "notnull", "null", "nulls", "of", "offset", "on",
      "or", "order", "others", "outer", "over", "partition", "plan", "pragma", "preceding",
      "primary", "query", "raise", "range", "recursive", "references", "regexp", "reindex",
      "release", "rename", "replace", "restrict", "returning", "right", "rollback", "row",
      "rows", "savepoint", "select", "set", "table", "temp", "temporary", "then", "ties",
      "first", "last", "to", "transaction", "trigger", "true", "unbounded", "union",
      "unique", "update",
      "using", "vacuum", "values", "view", "virtual", "when", "where", "window", "with",
      "without"};
  return kw;
}

class Parser {
 public:
  explicit Parser(const std::string& sql) : toks_(tokenize(sql)) {}

  ParsedSql parse() {
    ParsedSql out;
    out.root = std::make_unique<SqlScope>();
    bool wrapped = false;
    if (is_punct("(") && (peek_keyword(1, "select") || peek_keyword(1, "with"))) {
      advance();
      wrapped = true;
    }
    parse_select_stmt(*out.root, &out.top_level_order_by);
    if (wrapped) expect_punct(")");
    if (is_punct(";")) advance();
    if (cur().kind != TokKind::end) fail("trailing tokens after statement");
    return out;
  }

 private:
  static constexpr int kMaxDepth = 200;

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int depth_ = 0;

  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(std::size_t ahead) const {
    std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  void advance() {
    if (pos_ + 1 < toks_.size()) ++pos_;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw Error(Errc::unparseable_sql, why + " near token " + std::to_string(pos_));
  }

  bool is_keyword(const char* kw) const {
    return cur().kind == TokKind::ident && iequals(cur().text, kw);
  }
  bool peek_keyword(std::size_t ahead, const char* kw) const {
    const Token& t = peek(ahead);
    return t.kind == TokKind::ident && iequals(t.text, kw);
  }
  bool accept_keyword(const char* kw) {
    if (!is_keyword(kw)) return false;
    advance();
    return true;
  }
  void expect_keyword(const char* kw) {
    if (!accept_keyword(kw)) fail(std::string("expected ") + kw);
  }
  bool is_punct(const char* p) const {
    return cur().kind == TokKind::punct && cur().text == p;
  }
  bool accept_punct(const char* p) {
    if (!is_punct(p)) return false;
    advance();
    return true;
  }
  void expect_punct(const char* p) {
    if (!accept_punct(p)) fail(std::string("expected ") + p);
  }
  bool is_name() const {
    return cur().kind == TokKind::quoted_ident ||
           (cur().kind == TokKind::ident && keyword_set().count(to_lower(cur().text)) == 0);
  }
  std::string expect_name(const char* what) {
    if (!is_name()) fail(std::string("expected ") + what);
    std::string name = cur().text;
    advance();
    return name;
  }

  struct DepthGuard {
    Parser& p;
    explicit DepthGuard(Parser& parser) : p(parser) {
      if (++p.depth_ > kMaxDepth) p.fail("nesting too deep");
    }
    ~DepthGuard() { --p.depth_; }
  };

  SqlScope& child_scope(SqlScope& parent) {
    parent.children.push_back(std::make_unique<SqlScope>());
    parent.children.back()->parent = &parent;
    return *parent.children.back();
  }

  // statement := [WITH [RECURSIVE] cte (, cte)*] core (compound core)*
  //              [ORDER BY exprs] [LIMIT expr [OFFSET expr]]
  void parse_select_stmt(SqlScope& scope, bool* top_level_order_by) {
    DepthGuard guard(*this);
    if (accept_keyword("with")) {
      accept_keyword("recursive");
      do {
        std::string name = expect_name("CTE name");
        scope.cte_names.push_back(name);
        std::vector<std::string> renamed_outputs;
        if (accept_punct("(")) {
          do {
            renamed_outputs.push_back(expect_name("CTE column"));
          } while (accept_punct(","));
          expect_punct(")");
        }
        expect_keyword("as");
        accept_keyword("not");
        accept_keyword("materialized");
        expect_punct("(");
        SqlScope& body = child_scope(scope);
        parse_select_stmt(body, nullptr);
        expect_punct(")");
        body.output_names.insert(body.output_names.end(), renamed_outputs.begin(),
                                 renamed_outputs.end());
      } while (accept_punct(","));
    }

    parse_select_core(scope);
    while (true) {
      if (accept_keyword("union")) {
        accept_keyword("all");
      } else if (accept_keyword("intersect") || accept_keyword("except")) {
        // no modifier
      } else {
        break;
      }
      parse_select_core(child_scope(scope));
    }

    if (is_keyword("order")) {
      advance();
      expect_keyword("by");
      if (top_level_order_by) *top_level_order_by = true;
      do {
        parse_expr(scope, false);
        accept_keyword("asc") || accept_keyword("desc");
        if (accept_keyword("nulls")) {
          accept_keyword("first") || accept_keyword("last");
        }
      } while (accept_punct(","));
    }
    if (accept_keyword("limit")) {
      parse_expr(scope, false);
      if (accept_keyword("offset") || accept_punct(",")) parse_expr(scope, false);
    }
  }

  void parse_select_core(SqlScope& scope) {
    DepthGuard guard(*this);
    if (accept_keyword("values")) {
      do {
        expect_punct("(");
        do {
          parse_expr(scope, false);
        } while (accept_punct(","));
        expect_punct(")");
      } while (accept_punct(","));
      return;
    }

    expect_keyword("select");
    accept_keyword("distinct") || accept_keyword("all");

    do {
      if (accept_punct("*")) {
        scope.stars.push_back("");
        scope.star_output = true;
      } else if (is_name() && peek(1).kind == TokKind::punct && peek(1).text == "." &&
                 peek(2).kind == TokKind::punct && peek(2).text == "*") {
        scope.stars.push_back(cur().text);
        scope.star_output = true;
        advance();
        advance();
        advance();
      } else {
        std::size_t from = pos_;
        std::size_t cols_before = scope.columns.size();
        std::size_t aliases_before = scope.select_aliases.size();
        parse_expr(scope, true);
        std::size_t consumed = pos_ - from;
        // A result column that is exactly one column reference keeps its
        // own name as the output name.
        if (scope.columns.size() == cols_before + 1 &&
            scope.select_aliases.size() == aliases_before &&
            (consumed == 1 || consumed == 3 || consumed == 5)) {
          scope.output_names.push_back(scope.columns.back().column);
        }
      }
    } while (accept_punct(","));

    if (accept_keyword("from")) parse_from(scope);
    if (accept_keyword("where")) parse_expr(scope, false);
    if (is_keyword("group")) {
      advance();
      expect_keyword("by");
      do {
        parse_expr(scope, false);
      } while (accept_punct(","));
    }
    if (accept_keyword("having")) parse_expr(scope, false);
    if (accept_keyword("window")) {
      // Named-window clause: consume definitions without recording refs.
      do {
        expect_name("window name");
        expect_keyword("as");
        expect_punct("(");
        skip_parenthesized(scope);
      } while (accept_punct(","));
    }
  }

  void parse_from(SqlScope& scope) {
    DepthGuard guard(*this);
    parse_table_or_subquery(scope);
    while (true) {
      if (accept_punct(",")) {
        parse_table_or_subquery(scope);
        continue;
      }
      bool joined = false;
      while (is_keyword("natural") || is_keyword("left") || is_keyword("right") ||
             is_keyword("full") || is_keyword("inner") || is_keyword("cross") ||
             is_keyword("outer")) {
        advance();
        joined = true;
      }
      if (accept_keyword("join")) {
        joined = true;
      } else if (joined) {
        fail("expected JOIN");
      } else {
        break;
      }
      parse_table_or_subquery(scope);
      if (accept_keyword("on")) {
        parse_expr(scope, false);
      } else if (accept_keyword("using")) {
        expect_punct("(");
        do {
          scope.using_columns.push_back(expect_name("USING column"));
        } while (accept_punct(","));
        expect_punct(")");
      }
    }
  }

  bool cte_visible(const SqlScope& scope, const std::string& name) const {
    for (const SqlScope* s = &scope; s != nullptr; s = s->parent) {
      for (const auto& cte : s->cte_names) {
        if (iequals(cte, name)) return true;
      }
    }
    return false;
  }

  void parse_table_or_subquery(SqlScope& scope) {
    DepthGuard guard(*this);
    if (accept_punct("(")) {
      if (is_keyword("select") || is_keyword("with") || is_keyword("values")) {
        parse_select_stmt(child_scope(scope), nullptr);
        expect_punct(")");
        std::string alias = parse_alias_opt();
        if (!alias.empty()) scope.derived_aliases.push_back(alias);
      } else {
        parse_from(scope);
        expect_punct(")");
      }
      return;
    }
    std::string name = expect_name("table name");
    if (accept_punct(".")) name = expect_name("table name");
    if (is_punct("(")) {
      // Table-valued function: consume arguments, expose nothing linkable.
      advance();
      skip_parenthesized(scope);
      std::string alias = parse_alias_opt();
      if (!alias.empty()) scope.derived_aliases.push_back(alias);
      return;
    }
    std::string alias = parse_alias_opt();
    if (cte_visible(scope, name)) {
      scope.derived_aliases.push_back(alias.empty() ? name : alias);
    } else {
      scope.tables.push_back({name, alias});
    }
    if (accept_keyword("indexed")) {
      expect_keyword("by");
      expect_name("index name");
    } else if (is_keyword("not") && peek_keyword(1, "indexed")) {
      advance();
      advance();
    }
  }

  std::string parse_alias_opt() {
    if (accept_keyword("as")) return expect_name("alias");
    if (is_name()) {
      std::string alias = cur().text;
      advance();
      return alias;
    }
    return "";
  }

  // Consumes a balanced parenthesized region (the opening paren is already
  // consumed), recording subquery and column refs found inside.
  void skip_parenthesized(SqlScope& scope) {
    int depth = 1;
    while (depth > 0) {
      if (cur().kind == TokKind::end) fail("unbalanced parentheses");
      if (is_punct("(")) {
        if (peek_keyword(1, "select") || peek_keyword(1, "with")) {
          advance();
          parse_select_stmt(child_scope(scope), nullptr);
          expect_punct(")");
          continue;
        }
        ++depth;
      } else if (is_punct(")")) {
        --depth;
      } else if (is_name()) {
        consume_name_in_expr(scope, false, false);
        continue;
      }
      advance();
    }
  }

  bool is_clause_boundary() const {
    static const char* stops[] = {"from",  "where",     "group",  "having", "order",
                                  "limit", "offset",    "union",  "intersect", "except",
                                  "join",  "on",        "using",  "left",   "right",
                                  "full",  "inner",     "cross",  "natural", "window"};
    if (cur().kind != TokKind::ident) return false;
    for (const char* s : stops) {
      if (iequals(cur().text, s)) return true;
    }
    return false;
  }

  // Consumes one name (possibly qualified, possibly a function call) inside
  // an expression. prev_was_value tells whether the previous significant
  // token produced a value, which is how implicit select-list aliases are
  // recognized (`SELECT max(age) peak FROM ...`).
  void consume_name_in_expr(SqlScope& scope, bool select_list, bool prev_was_value) {
    std::string first = cur().text;
    advance();
    if (is_punct(".")) {
      advance();
      if (accept_punct("*")) {
        scope.stars.push_back(first);
        return;
      }
      std::string second = expect_name("column name");
      if (is_punct(".")) {
        advance();
        std::string third = expect_name("column name");
        scope.columns.push_back({second, third});
      } else {
        scope.columns.push_back({first, second});
      }
      return;
    }
    if (is_punct("(")) return;  // function call; arguments handled by the caller
    if (select_list && prev_was_value) {
      scope.select_aliases.push_back(first);
      scope.output_names.push_back(first);
    } else {
      scope.columns.push_back({"", first});
    }
  }

  // Scans one expression, recording column refs, stars (qualified only),
  // select aliases (select_list mode), and subqueries. Stops at a top-level
  // comma, closing paren, semicolon, end, or clause keyword.
  void parse_expr(SqlScope& scope, bool select_list) {
    DepthGuard guard(*this);
    int depth = 0;
    bool prev_was_value = false;
    while (true) {
      const Token& t = cur();
      if (t.kind == TokKind::end) {
        if (depth != 0) fail("unbalanced parentheses");
        return;
      }
      if (depth == 0 && t.kind == TokKind::punct &&
          (t.text == "," || t.text == ")" || t.text == ";")) {
        return;
      }
      if (depth == 0 && is_clause_boundary()) return;

      if (t.kind == TokKind::punct) {
        if (t.text == "(") {
          if (peek_keyword(1, "select") || peek_keyword(1, "with")) {
            advance();
            parse_select_stmt(child_scope(scope), nullptr);
            expect_punct(")");
            prev_was_value = true;
            continue;
          }
          ++depth;
          advance();
          prev_was_value = false;
          continue;
        }
        if (t.text == ")") {
          --depth;
          advance();
          prev_was_value = true;
          continue;
        }
        advance();
        prev_was_value = false;
        continue;
      }
      if (t.kind == TokKind::number || t.kind == TokKind::string) {
        advance();
        prev_was_value = true;
        continue;
      }
      // ident or quoted_ident
      if (t.kind == TokKind::ident && keyword_set().count(to_lower(t.text)) > 0) {
        std::string kw = to_lower(t.text);
        advance();
        if (kw == "as") {
          if (depth == 0 && select_list) {
            std::string alias = expect_name("alias");
            scope.select_aliases.push_back(alias);
            scope.output_names.push_back(alias);
          } else if (is_name()) {
            advance();  // CAST target type or non-select alias
          }
          prev_was_value = false;
          continue;
        }
        // Value-producing keywords leave an implicit-alias opportunity open.
        prev_was_value = (kw == "end" || kw == "null" || kw == "true" || kw == "false" ||
                          kw == "current_date" || kw == "current_time" ||
                          kw == "current_timestamp");
        continue;
      }
      consume_name_in_expr(scope, select_list && depth == 0, prev_was_value);
      prev_was_value = true;
    }
  }
};

}  // namespace

ParsedSql parse_sql(const std::string& sql) {
  if (trim(sql).empty()) throw Error(Errc::unparseable_sql, "empty statement");
  Parser parser(sql);
  return parser.parse();
}

}  // namespace sqlens
