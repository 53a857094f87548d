#include "sqlens/prompt.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "sqlens/errors.hpp"

namespace sqlens {

namespace {

void require(const std::string& field, const char* name) {
  if (field.empty()) throw Error(Errc::missing_section, fmt::format("prompt needs a {}", name));
}

void append_question_section(std::string& out, const PromptSpec& spec) {
  out += "[Question]\n";
  if (!spec.evidence.empty()) out += fmt::format("Evidence: {}\n", spec.evidence);
  out += fmt::format("Q: {}\nSQL:\n", spec.question);
}

std::string render_generation(const PromptSpec& spec) {
  require(spec.instruction, "instruction");
  require(spec.schema_text, "schema");
  require(spec.question, "question");
  std::string out;
  out += fmt::format("[Instruction]\n{}\n\n", spec.instruction);
  out += fmt::format("[Schema]\n{}\n\n", spec.schema_text);
  if (!spec.cell_samples.empty()) {
    out += fmt::format("[Cell Samples]\n{}\n\n", spec.cell_samples);
  }
  if (!spec.demonstrations.empty()) {
    out += "[Demonstrations]\n";
    for (const auto& demo : spec.demonstrations) {
      out += fmt::format("Q: {}\nSQL: {}\n\n", demo.question, demo.sql);
    }
  }
  append_question_section(out, spec);
  return out;
}

std::string render_refine(const PromptSpec& spec) {
  require(spec.prior_context, "prior context");
  require(spec.prior_sql, "original SQL");
  std::string out = spec.prior_context;
  if (out.back() != '\n') out += '\n';
  out += fmt::format("\n[Original SQL]\n{}\n", spec.prior_sql);
  out += "\n[Previous Execution Result]\n";
  if (spec.error_message.empty()) {
    out += "The query executed successfully but returned 0 rows.\n";
  } else {
    out += spec.error_message;
    out += '\n';
  }
  out += fmt::format("\n[Detected Error Type:] {}\n", error_kind_name(spec.error_kind));
  out += "Select one of the following strategies to apply:\n";
  int n = 1;
  for (const auto& hint : strategy_menu(spec.error_kind)) {
    out += fmt::format("{}. {}\n", n++, hint);
  }
  out += "Explain your strategy choice and apply it to refine the SQL.\n";
  out +=
      "\n[Expected Output Format]\n"
      "A single revised SQL query inside a ```sql code block.\n"
      "Ensure the output matches this format exactly.\n";
  return out;
}

}  // namespace

std::string build_prompt(const PromptSpec& spec) {
  if (spec.kind == PromptKind::refine) return render_refine(spec);
  return render_generation(spec);
}

const std::vector<std::string>& strategy_menu(ErrorKind kind) {
  static const std::vector<std::string> syntax = {
      "Re-check the SQL syntax near the reported token.",
      "Balance all parentheses and quotes.",
      "Rewrite the statement as a single plain SELECT.",
      "Remove constructs the database dialect does not support.",
  };
  static const std::vector<std::string> table = {
      "List the tables that actually exist in the schema.",
      "Replace the missing table with the closest schema table.",
      "Check table names for typos or wrong pluralization.",
      "Double-check all referenced schema components.",
  };
  static const std::vector<std::string> column = {
      "List the columns of every referenced table.",
      "Replace the missing column with the closest schema column.",
      "Qualify the column with the table that owns it.",
      "Double-check all referenced schema components.",
  };
  static const std::vector<std::string> type = {
      "Compare the operand types on both sides of the operator.",
      "Add an explicit CAST where the types differ.",
      "Avoid comparing text values with numeric values.",
      "Try SELECT with minimal columns first.",
  };
  static const std::vector<std::string> timeout = {
      "Tighten WHERE filters to shrink the rows scanned.",
      "Remove unnecessary joins and subqueries.",
      "Add a LIMIT while validating the logic.",
      "Try simplifying query structure.",
  };
  static const std::vector<std::string> ambiguous = {
      "Qualify every column with its table or alias.",
      "Check joined tables for duplicated column names.",
      "Rename conflicting output columns with AS.",
      "Double-check all referenced schema components.",
  };
  static const std::vector<std::string> no_result = {
      "Relax or remove filtering conditions one at a time.",
      "Verify literal values against the sample cell values.",
      "Check that join keys actually match across tables.",
      "Try SELECT with minimal columns first.",
  };
  static const std::vector<std::string> other = {
      "Try simplifying query structure.",
      "Focus on filtering conditions.",
      "Try SELECT with minimal columns first.",
      "Double-check all referenced schema components.",
  };
  switch (kind) {
    case ErrorKind::Syntax: return syntax;
    case ErrorKind::TableNotFound: return table;
    case ErrorKind::ColumnNotFound: return column;
    case ErrorKind::TypeMismatch: return type;
    case ErrorKind::Timeout: return timeout;
    case ErrorKind::AmbiguousColumn: return ambiguous;
    case ErrorKind::NoResult: return no_result;
    case ErrorKind::Other: return other;
  }
  return other;
}

std::vector<Demonstration> select_few_shots(const std::string& question,
                                            const std::vector<Demonstration>& pool,
                                            std::size_t k,
                                            const SimilarityProvider& provider) {
  struct Scored {
    double score;
    std::size_t index;
  };
  std::vector<Scored> scored;
  scored.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].question == question) continue;
    scored.push_back({provider.score(question, pool[i].question), i});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.index < b.index;
  });
  if (k < scored.size()) scored.resize(k);
  std::vector<Demonstration> out;
  out.reserve(scored.size());
  for (const auto& s : scored) out.push_back(pool[s.index]);
  return out;
}

}  // namespace sqlens
