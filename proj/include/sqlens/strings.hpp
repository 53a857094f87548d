#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sqlens {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

std::vector<std::string> split_lines(std::string_view text);

/// Whitespace-delimited token count; the unit used for prompt-size comparisons.
std::size_t token_count(std::string_view text);

/// Lowercase everything outside quoted regions, collapse whitespace runs to a
/// single space, strip a trailing semicolon. The text-mode vote-grouping key.
std::string normalize_sql_text(std::string_view sql);

/// CSV field escaping per RFC 4180 (quote when the field contains , " or newline).
std::string csv_escape(std::string_view field);

}  // namespace sqlens
