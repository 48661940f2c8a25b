#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "approx.hpp"
#include "bigint.hpp"
#include "error.hpp"
#include "pipeline.hpp"

namespace perfsum {

/// A parsed input set with optional metadata.
struct InputDocument {
  std::vector<double> values;
  std::optional<std::string> name;
  std::optional<std::string> family;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline InputDocument parse_json_document(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("malformed JSON input: ") + e.what());
  }
  InputDocument doc;
  const nlohmann::json* arr = &j;
  if (j.is_object()) {
    if (!j.contains("values")) throw InputError("JSON object input needs a \"values\" array");
    arr = &j.at("values");
    if (j.contains("name") && j["name"].is_string()) doc.name = j["name"].get<std::string>();
    if (j.contains("family") && j["family"].is_string()) doc.family = j["family"].get<std::string>();
  }
  if (!arr->is_array()) throw InputError("JSON input must be an array of numbers");
  doc.values.reserve(arr->size());
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto& v = (*arr)[i];
    if (!v.is_number()) throw InputError("JSON element " + std::to_string(i) + " is not a number");
    doc.values.push_back(v.get<double>());
  }
  return doc;
}

} // namespace detail

/// Parses plain text (one value per line), single-column CSV with an optional
/// header line, or a JSON array / {"values": [...]} object. Blank lines and
/// lines starting with '#' are skipped. Errors carry line and column.
inline InputDocument parse_input(const std::string& text) {
  const std::string_view body = detail::trim(text);
  if (!body.empty() && (body.front() == '[' || body.front() == '{')) return detail::parse_json_document(text);

  InputDocument doc;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool seen_data = false;
  bool header_allowed = true;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view raw(text.data() + pos, end - pos);
    ++line_no;
    pos = end + 1;
    const std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t column = static_cast<std::size_t>(line.data() - raw.data()) + 1;
    if (const auto comma = line.find(','); comma != std::string_view::npos)
      throw InputError("line " + std::to_string(line_no) + ", column " + std::to_string(column + comma) +
                       ": expected a single column");
    std::string_view field = line;
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') field = field.substr(1, field.size() - 2);
    const auto v = detail::parse_double(field);
    if (!v) {
      if (header_allowed && !seen_data) {
        header_allowed = false;  // one header line
        continue;
      }
      throw InputError("line " + std::to_string(line_no) + ", column " + std::to_string(column) + ": '" +
                       std::string(line) + "' is not a number");
    }
    if (!std::isfinite(*v))
      throw InputError("line " + std::to_string(line_no) + ", column " + std::to_string(column) +
                       ": non-finite value");
    doc.values.push_back(*v);
    seen_data = true;
  }
  if (doc.values.empty()) throw InputError("empty set");
  return doc;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline InputDocument load_input(const std::string& path) {
  InputDocument doc = parse_input(read_file(path));
  if (doc.values.empty()) throw InputError("empty set");
  return doc;
}

/// JSON number, or the strings "inf" / "-inf" / "nan" for non-finite values.
inline nlohmann::ordered_json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline nlohmann::ordered_json to_json(const BerryEsseenTerms& t) {
  nlohmann::ordered_json j;
  j["p"] = json_number(t.p);
  j["q"] = json_number(t.q);
  j["b"] = json_number(t.b);
  j["delta1"] = json_number(t.delta1);
  j["delta2"] = json_number(t.delta2);
  j["bound_over_C"] = json_number(t.bound_over_C);
  return j;
}

/// Frozen report shape; see docs/report.schema.json. Counts are decimal strings.
inline nlohmann::ordered_json to_json(const ApproxReport& r, bool include_rows = true) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["target"] = json_number(r.target);
  j["relation"] = std::string(to_string(r.relation));
  j["granularity"] = json_number(r.granularity);
  j["method"] = r.method;
  j["total"] = to_decimal(r.total);
  j["counts_materialized"] = r.counts_materialized;
  j["per_k_included"] = include_rows;
  auto rows = nlohmann::ordered_json::array();
  if (include_rows) {
    for (const PerKRow& row : r.per_k) {
      nlohmann::ordered_json o;
      o["k"] = row.k;
      o["probability"] = json_number(row.probability);
      o["count"] = row.count ? nlohmann::ordered_json(to_decimal(*row.count)) : nlohmann::ordered_json(nullptr);
      o["method_used"] = std::string(row.method_used);
      if (row.diagnostics) o["berry_esseen"] = to_json(*row.diagnostics);
      rows.push_back(std::move(o));
    }
  }
  j["per_k"] = std::move(rows);
  return j;
}

} // namespace perfsum
