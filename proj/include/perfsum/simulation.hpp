#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "approx.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "exact.hpp"
#include "io.hpp"
#include "kde.hpp"
#include "moments.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "rng.hpp"

namespace perfsum {

enum class SetFamily { discrete_uniform, uniform, chi_square, custom_file };

inline std::string_view to_string(SetFamily f) {
  switch (f) {
    case SetFamily::discrete_uniform: return "discrete_uniform";
    case SetFamily::uniform: return "uniform";
    case SetFamily::chi_square: return "chi_square";
    case SetFamily::custom_file: return "custom_file";
  }
  return "?";
}

inline SetFamily parse_family(std::string_view s) {
  if (s == "discrete_uniform") return SetFamily::discrete_uniform;
  if (s == "uniform") return SetFamily::uniform;
  if (s == "chi_square") return SetFamily::chi_square;
  if (s == "custom_file") return SetFamily::custom_file;
  throw InputError("unknown set family '" + std::string(s) + "'");
}

struct SetSpec {
  SetFamily family = SetFamily::discrete_uniform;
  double low = 0.0;
  double high = 20.0;
  double df = 3.0;
  std::string path;  // custom_file
  std::size_t n = 1;
  std::uint64_t seed = 0;
};

/// n i.i.d. draws from the family; discrete_uniform is inclusive of both
/// bounds. custom_file returns the file's values and ignores n and seed.
inline std::vector<double> generate_set(const SetSpec& spec) {
  if (spec.family == SetFamily::custom_file) return load_input(spec.path).values;
  if (spec.n == 0) throw DomainError("set size must be at least 1");
  Rng rng(spec.seed);
  std::vector<double> out(spec.n);
  switch (spec.family) {
    case SetFamily::discrete_uniform: {
      if (spec.low != std::floor(spec.low) || spec.high != std::floor(spec.high) || spec.low > spec.high)
        throw DomainError("discrete_uniform needs integer bounds low <= high");
      const auto lo = static_cast<std::int64_t>(spec.low);
      const auto hi = static_cast<std::int64_t>(spec.high);
      for (double& v : out) v = static_cast<double>(rng.between(lo, hi));
      break;
    }
    case SetFamily::uniform:
      if (!(spec.low < spec.high)) throw DomainError("uniform needs low < high");
      for (double& v : out) v = spec.low + (spec.high - spec.low) * rng.uniform();
      break;
    case SetFamily::chi_square:
      if (!(spec.df > 0.0)) throw DomainError("chi_square needs df > 0");
      for (double& v : out) v = rng.chi_square(spec.df);
      break;
    case SetFamily::custom_file: break;
  }
  return out;
}

/// One observation. axis is "n" (error experiments) or "k" (divergence).
struct ExperimentRow {
  std::string axis;
  std::size_t axis_value = 0;
  std::string method;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};

/// Aggregate over the rows sharing (axis_value, method, metric).
struct SummaryRow {
  std::string axis;
  std::size_t axis_value = 0;
  std::string method;
  std::string metric;  // source metric
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 when count < 2
};

struct ExperimentResult {
  std::string experiment;
  nlohmann::ordered_json metadata;
  std::vector<ExperimentRow> rows;
  std::vector<SummaryRow> summary;
};

inline nlohmann::ordered_json to_json(const SetSpec& s) {
  nlohmann::ordered_json j;
  j["family"] = std::string(to_string(s.family));
  switch (s.family) {
    case SetFamily::discrete_uniform:
    case SetFamily::uniform:
      j["low"] = s.low;
      j["high"] = s.high;
      break;
    case SetFamily::chi_square: j["df"] = s.df; break;
    case SetFamily::custom_file: j["path"] = s.path; break;
  }
  return j;
}

inline nlohmann::ordered_json to_json(const MethodSpec& m) {
  nlohmann::ordered_json j;
  j["name"] = std::string(to_string(m.kind));
  if (m.low) j["low"] = *m.low;
  if (m.high) j["high"] = *m.high;
  if (m.df) j["df"] = *m.df;
  if (m.kind == MethodKind::kde) {
    j["samples"] = m.samples;
    j["seed"] = m.seed;
  }
  return j;
}

namespace detail {

inline void sort_rows(std::vector<ExperimentRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ExperimentRow& a, const ExperimentRow& b) {
    return std::tie(a.axis_value, a.method, a.metric, a.seed) < std::tie(b.axis_value, b.method, b.metric, b.seed);
  });
}

inline std::vector<SummaryRow> summarize(const std::vector<ExperimentRow>& rows) {
  std::vector<SummaryRow> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].axis_value == rows[i].axis_value && rows[j].method == rows[i].method &&
           rows[j].metric == rows[i].metric)
      ++j;
    SummaryRow s{rows[i].axis, rows[i].axis_value, rows[i].method, rows[i].metric, j - i, 0.0, 0.0};
    double sum = 0.0;
    for (std::size_t r = i; r < j; ++r) sum += rows[r].value;
    s.mean = sum / static_cast<double>(s.count);
    if (s.count > 1) {
      double ss = 0.0;
      for (std::size_t r = i; r < j; ++r) ss += (rows[r].value - s.mean) * (rows[r].value - s.mean);
      s.sd = std::sqrt(ss / static_cast<double>(s.count - 1));
    }
    out.push_back(std::move(s));
    i = j;
  }
  return out;
}

} // namespace detail

/// Error-vs-n study. use_exact runs the exact oracle as the "approximation"
/// (error 0 by construction); otherwise `config` drives the pipeline.
struct ErrorExperiment {
  SetSpec family;
  std::vector<std::size_t> n_values;
  std::vector<std::uint64_t> seeds;
  ApproxConfig config;
  bool use_exact = false;
  double target_fraction = 0.5;  // T = target_fraction * n * sample mean
  ExactLimits limits;
};

inline nlohmann::ordered_json to_json(const ErrorExperiment& e) {
  nlohmann::ordered_json j;
  j["experiment"] = "error";
  j["family"] = to_json(e.family);
  j["n_values"] = e.n_values;
  j["seeds"] = e.seeds;
  j["method"] = e.use_exact ? nlohmann::ordered_json("exact") : to_json(e.config.method);
  j["relation"] = std::string(to_string(e.config.relation));
  j["granularity"] = e.config.granularity ? nlohmann::ordered_json(*e.config.granularity) : nlohmann::ordered_json("auto");
  j["exact_small_k"] = e.config.exact_small_k;
  j["target_fraction"] = e.target_fraction;
  j["max_enumeration_n"] = e.limits.max_enumeration_n;
  j["max_dp_cells"] = e.limits.max_dp_cells;
  return j;
}

/// Seed of the set drawn for (experiment seed, n).
inline std::uint64_t set_seed(std::uint64_t seed, std::size_t n) { return substream_seed(seed, n); }

namespace detail {

// True when the exact oracle can handle a size-n set from this family.
inline bool exact_feasible(const SetSpec& family, std::size_t n, const ExactLimits& limits) {
  if (n <= limits.max_enumeration_n) return true;
  if (family.family == SetFamily::discrete_uniform && family.low >= 0.0) {
    const double width = static_cast<double>(n) * family.high + 1.0;
    return width * static_cast<double>(n + 1) <= static_cast<double>(limits.max_dp_cells);
  }
  return false;
}

} // namespace detail

/// Per (n, seed): draw a set, count exactly and approximately at
/// T = target_fraction * n * mean, record |approx - exact| / max(exact, 1).
/// Summary carries the per-n mean and sample standard deviation.
inline ExperimentResult error_experiment(const ErrorExperiment& e) {
  ExperimentResult result;
  result.experiment = "error";
  result.metadata = to_json(e);
  if (e.family.family == SetFamily::custom_file) throw InputError("error experiment needs a generated family");
  std::vector<std::size_t> bad;
  for (const std::size_t n : e.n_values) {
    if (n == 0) throw DomainError("set size must be at least 1");
    if (!detail::exact_feasible(e.family, n, e.limits)) bad.push_back(n);
  }
  if (!bad.empty()) {
    std::string list;
    for (const std::size_t n : bad) list += (list.empty() ? "" : ", ") + std::to_string(n);
    throw InfeasibleError("exact oracle infeasible for n = " + list + " (enumeration cap " +
                          std::to_string(e.limits.max_enumeration_n) + ")");
  }
  if (e.seeds.empty() || e.n_values.empty()) return result;

  const std::string method = e.use_exact ? "exact" : std::string(to_string(e.config.method.kind));
  const std::size_t cells = e.n_values.size() * e.seeds.size();
  result.rows.resize(cells);
  parallel_for(cells, [&](std::size_t c) {
    const std::size_t n = e.n_values[c / e.seeds.size()];
    const std::uint64_t seed = e.seeds[c % e.seeds.size()];
    SetSpec spec = e.family;
    spec.n = n;
    spec.seed = set_seed(seed, n);
    const std::vector<double> values = generate_set(spec);
    const SetStatistics stats = set_statistics(values);
    const double target = e.target_fraction * static_cast<double>(n) * stats.mean;
    const BigInt exact =
        exact_perfect_sum(values, target, e.config.relation, e.config.tolerance, ExactEngine::automatic, e.limits).total;
    const BigInt approx = e.use_exact ? exact : approximate_perfect_sum(values, target, e.config).total;
    const BigInt diff = abs(approx - exact);
    const BigInt denom = exact > 1 ? exact : BigInt(1);
    result.rows[c] = {"n", n, method, "relative_error", mpq_class(diff, denom).get_d(), seed};
  });
  detail::sort_rows(result.rows);
  result.summary = detail::summarize(result.rows);
  return result;
}

struct DivergenceExperiment {
  std::vector<double> values;
  std::optional<SetSpec> source;  // echoed when the set was generated
  std::vector<std::size_t> k_values;
  std::vector<MethodSpec> methods;
  double granularity = 1.0;
  std::uint64_t seed = 0;  // KDE substreams derive from (seed, k)
  ExactLimits limits;
};

inline nlohmann::ordered_json to_json(const DivergenceExperiment& e) {
  nlohmann::ordered_json j;
  j["experiment"] = "divergence";
  if (e.source) {
    j["set"] = to_json(*e.source);
    j["set"]["n"] = e.source->n;
    j["set"]["seed"] = e.source->seed;
  }
  j["n"] = e.values.size();
  j["k_values"] = e.k_values;
  auto methods = nlohmann::ordered_json::array();
  for (const MethodSpec& m : e.methods) methods.push_back(to_json(m));
  j["methods"] = std::move(methods);
  j["granularity"] = e.granularity;
  j["seed"] = e.seed;
  return j;
}

/// Approximating law for size-k sums under `method`, discretized onto the
/// integer-multiple grid of g. Unset family parameters come from the set.
inline DiscretePmf approximate_pmf(std::span<const double> values, const SetStatistics& stats, std::size_t k,
                                   const MethodSpec& method, std::span<const double> support, double granularity,
                                   std::uint64_t seed) {
  switch (method.kind) {
    case MethodKind::normal: return discretize(normal_sum_approx(stats, k), support, granularity).pmf;
    case MethodKind::irwin_hall: {
      const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
      return discretize(irwin_hall_sum(k, method.low.value_or(*mn), method.high.value_or(*mx)), support, granularity)
          .pmf;
    }
    case MethodKind::chi_square:
      return discretize(chi_square_sum(k, method.df.value_or(stats.mean)), support, granularity).pmf;
    case MethodKind::kde:
      return discretize(fit_kde(values, k, method.samples, substream_seed(seed, k)), support, granularity).pmf;
  }
  throw DomainError("bad method");
}

/// Per (k, method): JSD between the exact binned pmf and the discretized
/// approximation on the grid spanning the exact support.
inline ExperimentResult divergence_experiment(const DivergenceExperiment& e) {
  ExperimentResult result;
  result.experiment = "divergence";
  result.metadata = to_json(e);
  const SetStatistics stats = set_statistics(e.values);
  if (!(e.granularity > 0.0)) throw DomainError("granularity must be positive");

  std::vector<ExactSumPmf> exact(e.k_values.size());
  std::vector<std::string> bad(e.k_values.size());
  parallel_for(e.k_values.size(), [&](std::size_t i) {
    try {
      exact[i] = exact_binned_pmf(e.values, e.k_values[i], e.granularity, e.limits);
    } catch (const InfeasibleError&) {
      bad[i] = std::to_string(e.k_values[i]);
    }
  });
  std::string list;
  for (const std::string& b : bad)
    if (!b.empty()) list += (list.empty() ? "" : ", ") + b;
  if (!list.empty()) throw InfeasibleError("exact pmf infeasible for k = " + list);

  const std::size_t cells = e.k_values.size() * e.methods.size();
  result.rows.resize(cells);
  parallel_for(cells, [&](std::size_t c) {
    const std::size_t i = c / e.methods.size();
    const MethodSpec& m = e.methods[c % e.methods.size()];
    const std::size_t k = e.k_values[i];
    try {
      const DiscretePmf ref = to_discrete(exact[i]);
      const std::vector<double> support = grid_support(ref.support.front(), ref.support.back(), e.granularity);
      const DiscretePmf approx = approximate_pmf(e.values, stats, k, m, support, e.granularity, e.seed);
      result.rows[c] = {"k", k, std::string(to_string(m.kind)), "jsd", js_divergence(ref, approx), e.seed};
    } catch (...) {
      detail::rethrow_with_k(k);
    }
  });
  detail::sort_rows(result.rows);
  result.summary = detail::summarize(result.rows);
  return result;
}

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace detail

/// experiment,axis,axis_value,method,metric,value,seed
inline std::string rows_csv(const ExperimentResult& r) {
  std::ostringstream out;
  out << "experiment,axis,axis_value,method,metric,value,seed\n";
  for (const ExperimentRow& row : r.rows)
    out << r.experiment << ',' << row.axis << ',' << row.axis_value << ',' << row.method << ',' << row.metric << ','
        << detail::format_double(row.value) << ',' << row.seed << '\n';
  return out.str();
}

/// experiment,axis,axis_value,method,metric,count,mean,sd
inline std::string summary_csv(const ExperimentResult& r) {
  std::ostringstream out;
  out << "experiment,axis,axis_value,method,metric,count,mean,sd\n";
  for (const SummaryRow& s : r.summary)
    out << r.experiment << ',' << s.axis << ',' << s.axis_value << ',' << s.method << ',' << s.metric << ','
        << s.count << ',' << detail::format_double(s.mean) << ',' << detail::format_double(s.sd) << '\n';
  return out.str();
}

inline nlohmann::ordered_json to_json(const ExperimentResult& r) {
  nlohmann::ordered_json j;
  j["experiment"] = r.experiment;
  j["metadata"] = r.metadata;
  auto rows = nlohmann::ordered_json::array();
  for (const ExperimentRow& row : r.rows) {
    nlohmann::ordered_json o;
    o["axis"] = row.axis;
    o["axis_value"] = row.axis_value;
    o["method"] = row.method;
    o["metric"] = row.metric;
    o["value"] = json_number(row.value);
    o["seed"] = row.seed;
    rows.push_back(std::move(o));
  }
  j["rows"] = std::move(rows);
  auto summary = nlohmann::ordered_json::array();
  for (const SummaryRow& s : r.summary) {
    nlohmann::ordered_json o;
    o["axis"] = s.axis;
    o["axis_value"] = s.axis_value;
    o["method"] = s.method;
    o["metric"] = s.metric;
    o["count"] = s.count;
    o["mean"] = json_number(s.mean);
    o["sd"] = json_number(s.sd);
    summary.push_back(std::move(o));
  }
  j["summary"] = std::move(summary);
  return j;
}

// ---- config files ----

namespace detail {

inline SetSpec parse_set_spec(const nlohmann::json& j) {
  SetSpec s;
  if (!j.is_object()) throw InputError("set spec must be an object");
  s.family = parse_family(j.value("family", std::string("discrete_uniform")));
  s.low = j.value("low", s.low);
  s.high = j.value("high", s.high);
  s.df = j.value("df", s.df);
  s.path = j.value("path", std::string());
  s.n = j.value("n", std::size_t{1});
  s.seed = j.value("seed", std::uint64_t{0});
  if (s.family == SetFamily::custom_file && s.path.empty()) throw InputError("custom_file needs \"path\"");
  return s;
}

inline MethodSpec parse_method_spec(const nlohmann::json& j) {
  MethodSpec m;
  if (j.is_string()) {
    m.kind = parse_method(j.get<std::string>());
    return m;
  }
  if (!j.is_object()) throw InputError("method must be a name or an object");
  m.kind = parse_method(j.value("name", std::string("normal")));
  if (j.contains("low")) m.low = j["low"].get<double>();
  if (j.contains("high")) m.high = j["high"].get<double>();
  if (j.contains("df")) m.df = j["df"].get<double>();
  m.samples = j.value("samples", m.samples);
  m.seed = j.value("seed", m.seed);
  return m;
}

inline std::vector<std::uint64_t> parse_seeds(const nlohmann::json& j) {
  if (j.is_array()) return j.get<std::vector<std::uint64_t>>();
  if (j.is_object()) {
    const auto count = j.value("count", std::uint64_t{0});
    const auto start = j.value("start", std::uint64_t{0});
    std::vector<std::uint64_t> out;
    for (std::uint64_t i = 0; i < count; ++i) out.push_back(start + i);
    return out;
  }
  throw InputError("seeds must be an array or {\"count\", \"start\"}");
}

} // namespace detail

/// A parsed simulation config: exactly one of the two experiments.
struct SimulationConfig {
  std::optional<ErrorExperiment> error;
  std::optional<DivergenceExperiment> divergence;
};

/// Parses a simulation config document (format in docs/simulation-config.md).
inline SimulationConfig parse_simulation_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw InputError(std::string("malformed config: ") + ex.what());
  }
  if (!j.is_object()) throw InputError("config must be a JSON object");
  SimulationConfig out;
  try {
    const std::string kind = j.value("experiment", std::string());
    if (kind == "error") {
      ErrorExperiment e;
      e.family = detail::parse_set_spec(j.at("family"));
      e.n_values = j.at("n_values").get<std::vector<std::size_t>>();
      e.seeds = detail::parse_seeds(j.at("seeds"));
      const auto& m = j.contains("method") ? j["method"] : nlohmann::json("normal");
      if (m.is_string() && m.get<std::string>() == "exact") e.use_exact = true;
      else e.config.method = detail::parse_method_spec(m);
      e.config.relation = parse_relation(j.value("relation", std::string("ge")));
      if (j.contains("granularity") && j["granularity"].is_number()) e.config.granularity = j["granularity"].get<double>();
      e.config.exact_small_k = j.value("exact_small_k", std::size_t{0});
      e.target_fraction = j.value("target_fraction", 0.5);
      e.limits.max_enumeration_n = j.value("max_enumeration_n", e.limits.max_enumeration_n);
      out.error = std::move(e);
    } else if (kind == "divergence") {
      DivergenceExperiment d;
      const SetSpec spec = detail::parse_set_spec(j.at("set"));
      d.values = generate_set(spec);
      if (spec.family != SetFamily::custom_file) d.source = spec;
      d.k_values = j.at("k_values").get<std::vector<std::size_t>>();
      for (const auto& m : j.at("methods")) d.methods.push_back(detail::parse_method_spec(m));
      d.granularity = j.value("granularity", 1.0);
      d.seed = j.value("seed", std::uint64_t{0});
      out.divergence = std::move(d);
    } else {
      throw InputError("config \"experiment\" must be \"error\" or \"divergence\"");
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("bad config: ") + ex.what());
  }
  return out;
}

inline ExperimentResult run_simulation(const SimulationConfig& c) {
  if (c.error) return error_experiment(*c.error);
  return divergence_experiment(*c.divergence);
}

} // namespace perfsum
