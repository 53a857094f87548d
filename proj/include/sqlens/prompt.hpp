#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sqlens/exec.hpp"
#include "sqlens/similarity.hpp"

namespace sqlens {

/// A worked example shown to the expert before the real question.
struct Demonstration {
  std::string question;
  std::string sql;
};

enum class PromptKind {
  presql,    /// question against the full schema
  postsql,   /// question against the schema pruned to the linked subset
  refine,    /// rewrite request after a failed or empty execution
};

/// Everything needed to render one prompt. Which fields are mandatory depends
/// on the kind; build_prompt throws Errc::missing_section when a mandatory
/// field is empty.
struct PromptSpec {
  PromptKind kind = PromptKind::presql;
  std::string instruction;
  std::string schema_text;
  std::string cell_samples;
  std::vector<Demonstration> demonstrations;
  std::string question;
  /// Extra natural-language hint attached to the question when the benchmark
  /// provides one; rendered inside the question section.
  std::string evidence;

  // refine only
  std::string prior_context;   /// the full prompt that produced prior_sql
  std::string prior_sql;
  std::string error_message;   /// empty when the query ran but returned no rows
  ErrorKind error_kind = ErrorKind::Other;
};

/// Renders the prompt as a deterministic byte string. Section order is fixed:
/// instruction, schema, cell samples, demonstrations, question. The refine
/// layout appends the failing SQL, the verbatim execution error, a detected
/// error type line with a per-kind strategy menu, and the expected output
/// format to the prior context.
std::string build_prompt(const PromptSpec& spec);

/// The numbered hint list shown under the detected error type line.
const std::vector<std::string>& strategy_menu(ErrorKind kind);

/// Picks the k pool entries most similar to the question, ordered by score
/// descending with pool index breaking ties. Entries whose question equals
/// the target exactly are excluded so benchmark items never leak their own
/// gold SQL. k larger than the pool returns the whole (filtered) pool.
std::vector<Demonstration> select_few_shots(const std::string& question,
                                            const std::vector<Demonstration>& pool,
                                            std::size_t k,
                                            const SimilarityProvider& provider);

}  // namespace sqlens
