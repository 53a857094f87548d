#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vendor_json.hpp"

namespace sqlens {

/// One database cell. Blobs keep their bytes in `text`.
struct Value {
  enum class Kind { null, integer, real, text, blob };

  Kind kind = Kind::null;
  std::int64_t as_int = 0;
  double as_real = 0.0;
  std::string text;

  static Value null() { return Value{}; }
  static Value integer(std::int64_t v) { return Value{Kind::integer, v, 0.0, {}}; }
  static Value real(double v) { return Value{Kind::real, 0, v, {}}; }
  static Value str(std::string v) { return Value{Kind::text, 0, 0.0, std::move(v)}; }
  static Value blob(std::string bytes) { return Value{Kind::blob, 0, 0.0, std::move(bytes)}; }

  bool operator==(const Value&) const = default;
};

///// Canonicalize a value for result comparison: reals are quantized to seven
/// significant digits (a 1e-6 relative grid, so comparison is an equivalence
/// relation) and integral reals collapse to integers. Text and blobs are
/// byte-preserving; null stays null.
Value normalize_value(const Value& v);

/// Canonical string encoding of a normalized value, used for row sorting and
/// fingerprints. Distinct normalized values produce distinct encodings.
std::string canonical_encoding(const Value& normalized);

/// Human-readable rendering for prompts and CSV cells. Reals use the shortest
/// round-trip form; null renders as NULL for prompts.
std::string render_value(const Value& v);

nlohmann::json value_to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);

}  // namespace sqlens
