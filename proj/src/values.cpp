#include "sqlens/values.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace sqlens {

namespace {

// Round-trip shortest decimal form of a double.
std::string shortest_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

// Quantize to 7 significant digits via scientific formatting.
double quantize_real(double v) {
  if (!std::isfinite(v)) return v;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6e", v);
  return std::strtod(buf, nullptr);
}

constexpr double kMaxExactIntDouble = 9.007199254740992e15;  // 2^53

}  // namespace

Value normalize_value(const Value& v) {
  if (v.kind != Value::Kind::real) return v;
  double q = quantize_real(v.as_real);
  if (std::isfinite(q) && std::fabs(q) < kMaxExactIntDouble && q == std::nearbyint(q)) {
    return Value::integer(static_cast<std::int64_t>(q));
  }
  return Value::real(q);
}

std::string canonical_encoding(const Value& v) {
  switch (v.kind) {
    case Value::Kind::null: return "n";
    case Value::Kind::integer: return "i:" + std::to_string(v.as_int);
    case Value::Kind::real: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "r:%.6e", v.as_real);
      return buf;
    }
    case Value::Kind::text: return "t:" + v.text;
    case Value::Kind::blob: {
      static const char* hex = "0123456789abcdef";
      std::string out = "b:";
      for (unsigned char c : v.text) {
        out.push_back(hex[c >> 4]);
        out.push_back(hex[c & 0xF]);
      }
      return out;
    }
  }
  return "?";
}

std::string render_value(const Value& v) {
  switch (v.kind) {
    case Value::Kind::null: return "NULL";
    case Value::Kind::integer: return std::to_string(v.as_int);
    case Value::Kind::real: return shortest_double(v.as_real);
    case Value::Kind::text: return v.text;
    case Value::Kind::blob: return "<blob:" + std::to_string(v.text.size()) + ">";
  }
  return "";
}

nlohmann::json value_to_json(const Value& v) {
  switch (v.kind) {
    case Value::Kind::null: return nullptr;
    case Value::Kind::integer: return v.as_int;
    case Value::Kind::real: return v.as_real;
    case Value::Kind::text: return v.text;
    case Value::Kind::blob: return nlohmann::json{{"blob", canonical_encoding(v).substr(2)}};
  }
  return nullptr;
}

Value value_from_json(const nlohmann::json& j) {
  if (j.is_null()) return Value::null();
  if (j.is_number_integer() || j.is_number_unsigned()) return Value::integer(j.get<std::int64_t>());
  if (j.is_number_float()) return Value::real(j.get<double>());
  if (j.is_string()) return Value::str(j.get<std::string>());
  if (j.is_object() && j.contains("blob")) {
    std::string hexed = j["blob"].get<std::string>();
    std::string bytes;
    for (std::size_t i = 0; i + 1 < hexed.size(); i += 2) {
      auto nibble = [](char c) -> unsigned {
        if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
        return static_cast<unsigned>(c - 'a' + 10);
      };
      bytes.push_back(static_cast<char>((nibble(hexed[i]) << 4) | nibble(hexed[i + 1])));
    }
    return Value::blob(std::move(bytes));
  }
  return Value::null();
}

}  // namespace sqlens
