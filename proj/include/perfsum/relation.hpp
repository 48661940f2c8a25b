#pragma once

#include <string>
#include <string_view>

#include "error.hpp"

namespace perfsum {

/// How a subset sum is compared with the target.
enum class Relation { eq, ge, le };

inline std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::eq: return "eq";
    case Relation::ge: return "ge";
    case Relation::le: return "le";
  }
  return "?";
}

inline Relation parse_relation(std::string_view s) {
  if (s == "eq" || s == "=" || s == "==") return Relation::eq;
  if (s == "ge" || s == ">=") return Relation::ge;
  if (s == "le" || s == "<=") return Relation::le;
  throw InputError("unknown relation '" + std::string(s) + "' (expected eq, ge or le)");
}

} // namespace perfsum
