#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "approx.hpp"
#include "bigint.hpp"
#include "counting.hpp"
#include "error.hpp"
#include "exact.hpp"
#include "kde.hpp"
#include "moments.hpp"
#include "parallel.hpp"
#include "relation.hpp"
#include "rng.hpp"

namespace perfsum {

enum class MethodKind { normal, irwin_hall, chi_square, kde };

inline std::string_view to_string(MethodKind m) {
  switch (m) {
    case MethodKind::normal: return "normal";
    case MethodKind::irwin_hall: return "irwin_hall";
    case MethodKind::chi_square: return "chi_square";
    case MethodKind::kde: return "kde";
  }
  return "?";
}

inline MethodKind parse_method(std::string_view s) {
  if (s == "normal") return MethodKind::normal;
  if (s == "irwin_hall" || s == "irwin-hall" || s == "bates") return MethodKind::irwin_hall;
  if (s == "chi_square" || s == "chi-square" || s == "chisq") return MethodKind::chi_square;
  if (s == "kde") return MethodKind::kde;
  throw InputError("unknown method '" + std::string(s) + "' (expected normal, irwin_hall, chi_square or kde)");
}

/// Approximating family and its parameters. Unset family parameters are
/// estimated from the set: uniform bounds from min/max, chi-square df from
/// the mean (method of moments).
struct MethodSpec {
  MethodKind kind = MethodKind::normal;
  std::optional<double> low;
  std::optional<double> high;
  std::optional<double> df;
  std::size_t samples = kDefaultKdeSamples;
  std::uint64_t seed = 0;
};

/// When the report carries big-integer per-k counts. Totals are always exact.
enum class CountDetail { automatic, always, never };

/// Largest n for which CountDetail::automatic materializes per-k counts.
inline constexpr std::size_t kAutoDetailMaxN = 5000;

struct ApproxConfig {
  MethodSpec method;
  Relation relation = Relation::ge;
  /// nullopt: derive from the data (see auto_granularity).
  std::optional<double> granularity;
  std::size_t k_min = 1;
  /// 0 means n.
  std::size_t k_max = 0;
  /// Count sizes k <= exact_small_k exactly when C(n, k) <= kExactSmallKSubsets.
  std::size_t exact_small_k = 0;
  /// eq tolerance for exactly counted sizes.
  double tolerance = 0.0;
  bool diagnostics = false;
  CountDetail detail = CountDetail::automatic;
};

inline constexpr std::uint64_t kExactSmallKSubsets = 1'000'000;

struct PerKRow {
  std::size_t k = 0;
  double probability = 0.0;
  std::optional<BigInt> count;
  std::string_view method_used;  // static string
  std::optional<BerryEsseenTerms> diagnostics;
};

struct ApproxReport {
  std::size_t n = 0;
  double target = 0.0;
  Relation relation = Relation::ge;
  double granularity = 0.0;
  std::string method;
  std::vector<PerKRow> per_k;
  BigInt total;
  bool counts_materialized = false;
};

/// Windowed probability under a fitted tophat KDE; same conventions as the
/// SumDistribution overload.
inline double probability_query(const KdeModel& model, double target, Relation relation, double granularity) {
  return detail::windowed_probability(model, target, relation, granularity);
}

/// gcd of the differences from the first element for integer-valued sets
/// (1 when all elements are equal); 0 for real-valued sets.
inline double auto_granularity(std::span<const double> values) {
  if (values.empty() || !detail::all_integral(values)) return 0.0;
  std::uint64_t g = 0;
  const double first = values.front();
  for (const double v : values) g = std::gcd(g, static_cast<std::uint64_t>(std::fabs(v - first)));
  return g == 0 ? 1.0 : static_cast<double>(g);
}

namespace detail {

[[noreturn]] inline void rethrow_with_k(std::size_t k) {
  try {
    throw;
  } catch (const InfeasibleError& e) {
    throw InfeasibleError("k=" + std::to_string(k) + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError("k=" + std::to_string(k) + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError("k=" + std::to_string(k) + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("k=" + std::to_string(k) + ": " + e.what());
  }
}

inline bool relation_holds(double sum, double target, Relation relation, double tolerance) {
  switch (relation) {
    case Relation::eq: return std::fabs(sum - target) <= tolerance;
    case Relation::ge: return sum >= target;
    case Relation::le: return sum <= target;
  }
  return false;
}

// Exact number of k-subsets meeting the relation, by enumerating them.
inline std::uint64_t count_k_subsets(std::span<const double> values, std::size_t k, double target, Relation relation,
                                     double tolerance) {
  std::uint64_t hits = 0;
  auto walk = [&](auto&& self, std::size_t left, std::size_t start, double partial) -> void {
    if (left == 0) {
      hits += relation_holds(partial, target, relation, tolerance) ? 1 : 0;
      return;
    }
    for (std::size_t i = start; i + left <= values.size(); ++i) self(self, left - 1, i + 1, partial + values[i]);
  };
  walk(walk, k, 0, 0.0);
  return hits;
}

} // namespace detail

/// Approximate perfect-sum count: for each k, approximate the law of the
/// size-k subset sum, take P(sum {=,>=,<=} T), convert to
/// round_half_even(P * C(n, k)) and accumulate.
inline ApproxReport approximate_perfect_sum(std::span<const double> values, double target,
                                            const ApproxConfig& config) {
  const SetStatistics stats = set_statistics(values);
  const std::size_t n = stats.n;
  const std::size_t k_max = config.k_max == 0 ? n : config.k_max;
  if (config.k_min < 1 || k_max > n || config.k_min > k_max)
    throw DomainError("k range [" + std::to_string(config.k_min) + ", " + std::to_string(k_max) +
                      "] invalid for n=" + std::to_string(n));
  if (config.exact_small_k > k_max) throw DomainError("exact_small_k exceeds k_max");
  if (!std::isfinite(target)) throw InputError("target must be finite");

  const double g = config.granularity.value_or(auto_granularity(values));
  if (!(g >= 0.0) || !std::isfinite(g)) throw DomainError("granularity must be nonnegative");

  const MethodSpec& method = config.method;
  double low = 0.0;
  double high = 0.0;
  double df = 0.0;
  if (method.kind == MethodKind::irwin_hall) {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    low = method.low.value_or(*mn);
    high = method.high.value_or(*mx);
    if (!(low < high)) throw DomainError("irwin_hall needs low < high (set bounds are degenerate)");
  } else if (method.kind == MethodKind::chi_square) {
    df = method.df.value_or(stats.mean);
    if (!(df > 0.0)) throw DomainError("chi_square needs df > 0");
  } else if (method.kind == MethodKind::kde && method.samples < 2) {
    throw DomainError("kde needs at least 2 samples");
  }

  // Diagnostics never gate the run: a set with no normal limit just has none.
  std::optional<detail::BerryEsseenMoments> moments;
  if (config.diagnostics && stats.variance > 0.0) moments = detail::berry_esseen_moments(values, stats);

  ApproxReport report;
  report.n = n;
  report.target = target;
  report.relation = config.relation;
  report.granularity = g;
  report.method = std::string(to_string(method.kind));
  report.counts_materialized = config.detail == CountDetail::always ||
                               (config.detail == CountDetail::automatic && n <= kAutoDetailMaxN);

  const std::size_t rows = k_max - config.k_min + 1;
  report.per_k.resize(rows);
  std::vector<std::optional<std::uint64_t>> exact_count(rows);

  parallel_for(rows, [&](std::size_t r) {
    const std::size_t k = config.k_min + r;
    PerKRow& row = report.per_k[r];
    row.k = k;
    try {
      if (k <= config.exact_small_k && cmp(binomial(n, k), BigInt(static_cast<unsigned long>(kExactSmallKSubsets))) <= 0) {
        const std::uint64_t c = detail::count_k_subsets(values, k, target, config.relation, config.tolerance);
        exact_count[r] = c;
        row.probability = mpq_class(BigInt(static_cast<unsigned long>(c)), binomial(n, k)).get_d();
        row.method_used = "exact";
      } else if (k == n) {
        row.probability = probability_query(SumDistribution::degenerate(subset_sum_mean(stats, n)), target,
                                            config.relation, g);
        row.method_used = "degenerate";
      } else {
        switch (method.kind) {
          case MethodKind::normal: {
            const SumDistribution d = normal_sum_approx(stats, k);
            row.probability = probability_query(d, target, config.relation, g);
            row.method_used = d.is_degenerate() ? "degenerate" : "normal";
            break;
          }
          case MethodKind::irwin_hall: {
            const SumDistribution d = irwin_hall_sum(k, low, high);
            row.probability = probability_query(d, target, config.relation, g);
            row.method_used = d.uses_normal_limit() ? "irwin_hall_normal_limit" : "irwin_hall";
            break;
          }
          case MethodKind::chi_square:
            row.probability = probability_query(chi_square_sum(k, df), target, config.relation, g);
            row.method_used = "chi_square";
            break;
          case MethodKind::kde: {
            const KdeModel model = fit_kde(values, k, method.samples, substream_seed(method.seed, k));
            row.probability = probability_query(model, target, config.relation, g);
            row.method_used = "kde";
            break;
          }
        }
      }
      if (moments) {
        try {
          row.diagnostics = detail::berry_esseen_from_moments(n, k, *moments);
        } catch (const DomainError&) {
        }
      }
    } catch (...) {
      detail::rethrow_with_k(k);
    }
  });

  // Exact strata are added as integers; the rest go through the rounded total.
  std::vector<double> probs(n + 1, 0.0);
  BigInt exact_sum = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (exact_count[r]) exact_sum += static_cast<unsigned long>(*exact_count[r]);
    else probs[report.per_k[r].k] = report.per_k[r].probability;
  }
  report.total = rounded_binomial_total(n, probs) + exact_sum;

  if (report.counts_materialized) {
    parallel_for(rows, [&](std::size_t r) {
      PerKRow& row = report.per_k[r];
      if (exact_count[r]) row.count = BigInt(static_cast<unsigned long>(*exact_count[r]));
      else row.count = scale_round_half_even(row.probability, binomial(n, row.k));
    });
  }
  return report;
}

enum class ExactEngine { automatic, enumerate, dp };

inline ExactEngine parse_engine(std::string_view s) {
  if (s == "auto") return ExactEngine::automatic;
  if (s == "enumerate") return ExactEngine::enumerate;
  if (s == "dp") return ExactEngine::dp;
  throw InputError("unknown engine '" + std::string(s) + "' (expected enumerate, dp or auto)");
}

namespace detail {

// Integer sets: reduce a real target/tolerance to integer dp queries.
inline CountBySize dp_counts_real_target(std::span<const std::int64_t> ints, double target, Relation relation,
                                         double tolerance, const ExactLimits& limits) {
  switch (relation) {
    case Relation::ge: return dp_counts(ints, static_cast<std::int64_t>(std::ceil(target)), Relation::ge, limits);
    case Relation::le: return dp_counts(ints, static_cast<std::int64_t>(std::floor(target)), Relation::le, limits);
    case Relation::eq: {
      const auto lo = static_cast<std::int64_t>(std::ceil(target - tolerance));
      const auto hi = static_cast<std::int64_t>(std::floor(target + tolerance));
      if (lo == hi) return dp_counts(ints, lo, Relation::eq, limits);
      CountBySize out = dp_counts(ints, hi, Relation::le, limits);
      if (lo > hi) {
        for (auto& c : out.counts) c = 0;
      } else {
        const CountBySize below = dp_counts(ints, lo - 1, Relation::le, limits);
        for (std::size_t k = 0; k < out.counts.size(); ++k) out.counts[k] -= below.counts[k];
      }
      out.recompute_total();
      return out;
    }
  }
  throw DomainError("bad relation");
}

} // namespace detail

/// Ground-truth counts in the report shape (probability = count / C(n, k)).
inline ApproxReport exact_perfect_sum(std::span<const double> values, double target, Relation relation,
                                      double tolerance = 0.0, ExactEngine engine = ExactEngine::automatic,
                                      const ExactLimits& limits = {}) {
  detail::check_values(values);
  if (!(tolerance >= 0.0)) throw DomainError("tolerance must be nonnegative");
  const std::size_t n = values.size();
  const bool integral = detail::all_integral(values);
  if (engine == ExactEngine::dp && !integral) throw InputError("dp engine needs integer-valued input");

  CountBySize counts;
  std::string_view used;
  auto run_enumerate = [&] {
    try {
      counts = enumerate_counts(values, target, relation, tolerance, limits);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError(std::string(e.what()) + "; use the approximate mode for larger sets");
    }
    used = "enumerate";
  };
  if (engine == ExactEngine::enumerate) {
    run_enumerate();
  } else if (integral) {
    try {
      counts = detail::dp_counts_real_target(detail::to_integers(values), target, relation, tolerance, limits);
      used = "dp";
    } catch (const InfeasibleError& e) {
      if (engine == ExactEngine::dp) throw InfeasibleError(std::string(e.what()) + "; use the approximate mode");
      run_enumerate();
    }
  } else {
    run_enumerate();
  }

  ApproxReport report;
  report.n = n;
  report.target = target;
  report.relation = relation;
  report.granularity = 0.0;
  report.method = std::string(used);
  report.counts_materialized = true;
  report.per_k.resize(n);
  for (std::size_t k = 1; k <= n; ++k) {
    PerKRow& row = report.per_k[k - 1];
    row.k = k;
    row.count = counts.counts[k];
    row.probability = mpq_class(counts.counts[k], binomial(n, k)).get_d();
    row.method_used = used;
  }
  report.total = counts.total;
  return report;
}

} // namespace perfsum
