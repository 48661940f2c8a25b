#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "bigint.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "relation.hpp"

namespace perfsum {

/// Subset counts by subset size. Index 0 (the empty subset) is always 0.
struct CountBySize {
  std::vector<BigInt> counts;
  BigInt total;

  std::size_t n() const { return counts.empty() ? 0 : counts.size() - 1; }
  const BigInt& operator[](std::size_t k) const { return counts.at(k); }

  static CountBySize zeros(std::size_t n) {
    CountBySize c;
    c.counts.assign(n + 1, BigInt(0));
    return c;
  }
  void recompute_total() {
    total = 0;
    for (const BigInt& v : counts) total += v;
  }
};

inline bool operator==(const CountBySize& a, const CountBySize& b) {
  return a.counts == b.counts && a.total == b.total;
}

/// Exact distribution of the sum of a uniformly random k-subset.
/// mass[i] * C(n, k) == counts[i] up to double rounding of the ratio.
struct ExactSumPmf {
  std::size_t k = 0;
  std::vector<double> support;
  std::vector<double> mass;
  std::vector<BigInt> counts;
};

/// Feasibility caps for the exact oracles.
struct ExactLimits {
  std::size_t max_enumeration_n = 26;
  std::uint64_t max_pmf_subsets = 20'000'000;
  std::uint64_t max_dp_cells = 50'000'000;
};

/// Grouping radius for real-valued sums in exact_sum_pmf.
inline constexpr double kSumMergeTolerance = 1e-9;

namespace detail {

inline void check_values(std::span<const double> values) {
  if (values.empty()) throw InputError("empty set");
  for (const double v : values)
    if (std::isnan(v)) throw InputError("NaN in set");
    else if (!std::isfinite(v)) throw InputError("non-finite element");
}

inline bool all_integral(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) {
    return std::isfinite(v) && v == std::nearbyint(v) && std::fabs(v) < 0x1.0p52;
  });
}

inline std::vector<std::int64_t> to_integers(std::span<const double> values) {
  std::vector<std::int64_t> out;
  out.reserve(values.size());
  for (const double v : values) out.push_back(static_cast<std::int64_t>(v));
  return out;
}

// Subset sums of every mask over `values`, with popcounts.
inline void mask_sums(std::span<const double> values, std::vector<double>& sums,
                      std::vector<std::uint8_t>& pops) {
  const std::size_t size = std::size_t{1} << values.size();
  sums.assign(size, 0.0);
  pops.assign(size, 0);
  for (std::size_t m = 1; m < size; ++m) {
    const std::size_t low = m & (m - 1);
    sums[m] = sums[low] + values[static_cast<std::size_t>(std::countr_zero(m))];
    pops[m] = static_cast<std::uint8_t>(pops[low] + 1);
  }
}

template <class Pred>
CountBySize enumerate_with(std::span<const double> values, Pred pred) {
  const std::size_t n = values.size();
  const std::size_t lo_bits = std::min<std::size_t>(n, 12);
  std::vector<double> lo_sum, hi_sum;
  std::vector<std::uint8_t> lo_pop, hi_pop;
  mask_sums(values.first(lo_bits), lo_sum, lo_pop);
  mask_sums(values.subspan(lo_bits), hi_sum, hi_pop);

  std::array<std::uint64_t, 64> total{};
  std::mutex merge;
  const std::size_t hi_count = hi_sum.size();
  const std::size_t chunk = 64;
  const std::size_t chunks = (hi_count + chunk - 1) / chunk;
  parallel_for(chunks, [&](std::size_t c) {
    std::array<std::uint64_t, 64> local{};
    const std::size_t end = std::min(hi_count, (c + 1) * chunk);
    for (std::size_t h = c * chunk; h < end; ++h) {
      const double hs = hi_sum[h];
      const std::size_t hp = hi_pop[h];
      for (std::size_t l = 0; l < lo_sum.size(); ++l)
        if (pred(hs + lo_sum[l])) ++local[hp + lo_pop[l]];
    }
    const std::lock_guard lock(merge);
    for (std::size_t i = 0; i < local.size(); ++i) total[i] += local[i];
  });

  CountBySize out = CountBySize::zeros(n);
  for (std::size_t k = 1; k <= n; ++k) out.counts[k] = static_cast<unsigned long>(total[k]);
  out.recompute_total();
  return out;
}

} // namespace detail

/// Exhaustive count of the k-subsets (k = 1..n) whose sum satisfies
/// `relation` against `target`. `tolerance` widens eq to |sum - T| <= tol.
inline CountBySize enumerate_counts(std::span<const double> values, double target, Relation relation,
                                    double tolerance = 0.0, const ExactLimits& limits = {}) {
  detail::check_values(values);
  if (values.size() > limits.max_enumeration_n || values.size() > 40)
    throw InfeasibleError("enumeration cap exceeded: n=" + std::to_string(values.size()) +
                          " > cap " + std::to_string(limits.max_enumeration_n));
  if (!(tolerance >= 0.0)) throw DomainError("tolerance must be nonnegative");
  switch (relation) {
    case Relation::eq:
      return detail::enumerate_with(values, [=](double s) { return std::fabs(s - target) <= tolerance; });
    case Relation::ge:
      return detail::enumerate_with(values, [=](double s) { return s >= target; });
    case Relation::le:
      return detail::enumerate_with(values, [=](double s) { return s <= target; });
  }
  throw DomainError("bad relation");
}

namespace detail {

// Full subset-sum histogram: rows[k][s - offset] = number of k-subsets with
// sum s, for k = 0..max_k.
struct SumHistogram {
  std::int64_t offset = 0;
  std::vector<std::vector<BigInt>> rows;
};

inline SumHistogram sum_histogram(std::span<const std::int64_t> values, std::size_t max_k,
                                  const ExactLimits& limits) {
  __int128 lo = 0;
  __int128 hi = 0;
  for (const std::int64_t v : values) (v < 0 ? lo : hi) += v;
  const __int128 width = hi - lo + 1;
  const __int128 cells = width * static_cast<__int128>(max_k + 1);
  if (cells > static_cast<__int128>(limits.max_dp_cells))
    throw InfeasibleError("dp table too large: " + std::to_string(max_k + 1) + " x " +
                          std::to_string(static_cast<long long>(std::min<__int128>(width, INT64_MAX))) +
                          " cells exceeds cap " + std::to_string(limits.max_dp_cells));
  SumHistogram h;
  h.offset = static_cast<std::int64_t>(lo);
  const auto w = static_cast<std::size_t>(width);
  h.rows.assign(max_k + 1, std::vector<BigInt>(w));
  h.rows[0][static_cast<std::size_t>(-h.offset)] = 1;
  std::size_t used = 0;
  for (const std::int64_t x : values) {
    ++used;
    for (std::size_t k = std::min(used, max_k); k >= 1; --k) {
      const auto& src = h.rows[k - 1];
      auto& dst = h.rows[k];
      for (std::size_t s = 0; s < w; ++s)
        if (sgn(src[s]) != 0) dst[static_cast<std::size_t>(static_cast<std::int64_t>(s) + x)] += src[s];
    }
  }
  return h;
}

} // namespace detail

/// Dynamic-programming count over (subset size, partial sum) with
/// big-integer cells. Nonnegative sets use a table of width target+1
/// (ge saturates into the target column); signed sets use the full sum range.
inline CountBySize dp_counts(std::span<const std::int64_t> values, std::int64_t target, Relation relation,
                             const ExactLimits& limits = {}) {
  if (values.empty()) throw InputError("empty set");
  const std::size_t n = values.size();
  const bool nonnegative = std::all_of(values.begin(), values.end(), [](std::int64_t v) { return v >= 0; });
  CountBySize out = CountBySize::zeros(n);

  if (!nonnegative) {
    const auto h = detail::sum_histogram(values, n, limits);
    const std::int64_t t = target - h.offset;
    const auto width = static_cast<std::int64_t>(h.rows[0].size());
    for (std::size_t k = 1; k <= n; ++k) {
      const auto& row = h.rows[k];
      BigInt acc = 0;
      switch (relation) {
        case Relation::eq:
          if (t >= 0 && t < width) acc = row[static_cast<std::size_t>(t)];
          break;
        case Relation::ge:
          for (std::int64_t s = std::max<std::int64_t>(t, 0); s < width; ++s) acc += row[static_cast<std::size_t>(s)];
          break;
        case Relation::le:
          for (std::int64_t s = 0; s <= std::min(t, width - 1); ++s) acc += row[static_cast<std::size_t>(s)];
          break;
      }
      out.counts[k] = acc;
    }
    out.recompute_total();
    return out;
  }

  if (target < 0 || (relation == Relation::ge && target == 0)) {
    // Every nonempty subset sum is >= 0: either all or none qualify.
    if (relation == Relation::ge)
      for (std::size_t k = 1; k <= n; ++k) out.counts[k] = binomial(n, k);
    out.recompute_total();
    return out;
  }

  const __int128 width = static_cast<__int128>(target) + 1;
  if (width * static_cast<__int128>(n + 1) > static_cast<__int128>(limits.max_dp_cells))
    throw InfeasibleError("dp table too large: " + std::to_string(n + 1) + " x " + std::to_string(target + 1) +
                          " cells exceeds cap " + std::to_string(limits.max_dp_cells));
  const auto w = static_cast<std::size_t>(width);
  const auto t = static_cast<std::size_t>(target);
  std::vector<std::vector<BigInt>> rows(n + 1, std::vector<BigInt>(w));
  rows[0][0] = 1;
  std::size_t used = 0;
  for (const std::int64_t xv : values) {
    ++used;
    const auto x = static_cast<std::uint64_t>(xv);
    for (std::size_t k = used; k >= 1; --k) {
      const auto& src = rows[k - 1];
      auto& dst = rows[k];
      for (std::size_t s = 0; s < w; ++s) {
        if (sgn(src[s]) == 0) continue;
        std::uint64_t d = s + x;
        if (d > t) {
          if (relation != Relation::ge) continue;
          d = t;
        }
        dst[d] += src[s];
      }
    }
  }
  for (std::size_t k = 1; k <= n; ++k) {
    if (relation == Relation::le) {
      BigInt acc = 0;
      for (const BigInt& v : rows[k]) acc += v;
      out.counts[k] = acc;
    } else {
      out.counts[k] = rows[k][t];
    }
  }
  out.recompute_total();
  return out;
}

namespace detail {

inline void check_k(std::size_t k, std::size_t n) {
  if (k == 0 || k > n)
    throw DomainError("subset size k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
}

inline void collect_k_sums(std::span<const double> values, std::size_t k, std::size_t start, double partial,
                           std::vector<double>& out) {
  if (k == 0) {
    out.push_back(partial);
    return;
  }
  for (std::size_t i = start; i + k <= values.size(); ++i)
    collect_k_sums(values, k - 1, i + 1, partial + values[i], out);
}

inline std::vector<double> all_k_sums(std::span<const double> values, std::size_t k, const ExactLimits& limits) {
  const BigInt c = binomial(values.size(), k);
  if (cmp(c, BigInt(static_cast<unsigned long>(limits.max_pmf_subsets))) > 0)
    throw InfeasibleError("C(" + std::to_string(values.size()) + ", " + std::to_string(k) + ") = " + to_decimal(c) +
                          " subsets exceeds enumeration cap " + std::to_string(limits.max_pmf_subsets));
  std::vector<double> sums;
  sums.reserve(static_cast<std::size_t>(c.get_ui()));
  collect_k_sums(values, k, 0, 0.0, sums);
  return sums;
}

inline ExactSumPmf finish_pmf(std::size_t n, std::size_t k, std::vector<double> support, std::vector<BigInt> counts) {
  const BigInt total = binomial(n, k);
  ExactSumPmf pmf;
  pmf.k = k;
  pmf.support = std::move(support);
  pmf.counts = std::move(counts);
  pmf.mass.reserve(pmf.counts.size());
  for (const BigInt& c : pmf.counts) pmf.mass.push_back(mpq_class(c, total).get_d());
  return pmf;
}

inline ExactSumPmf pmf_from_histogram(std::size_t n, std::size_t k, const SumHistogram& h, double scale) {
  std::vector<double> support;
  std::vector<BigInt> counts;
  const auto& row = h.rows[k];
  for (std::size_t s = 0; s < row.size(); ++s) {
    if (sgn(row[s]) == 0) continue;
    support.push_back(static_cast<double>(static_cast<std::int64_t>(s) + h.offset) * scale);
    counts.push_back(row[s]);
  }
  return finish_pmf(n, k, std::move(support), std::move(counts));
}

} // namespace detail

/// Exact pmf of the size-k subset sum. Integer-valued sets go through the
/// sum histogram; real-valued sets are enumerated, and sums within
/// kSumMergeTolerance of a group's first member share one support point.
inline ExactSumPmf exact_sum_pmf(std::span<const double> values, std::size_t k, const ExactLimits& limits = {}) {
  detail::check_values(values);
  detail::check_k(k, values.size());
  if (detail::all_integral(values)) {
    try {
      const auto ints = detail::to_integers(values);
      return detail::pmf_from_histogram(values.size(), k, detail::sum_histogram(ints, k, limits), 1.0);
    } catch (const InfeasibleError&) {
      // Wide sum range: fall through to enumeration.
    }
  }
  std::vector<double> sums = detail::all_k_sums(values, k, limits);
  std::sort(sums.begin(), sums.end());
  std::vector<double> support;
  std::vector<BigInt> counts;
  std::size_t i = 0;
  while (i < sums.size()) {
    const double rep = sums[i];
    std::size_t j = i;
    while (j < sums.size() && sums[j] - rep <= kSumMergeTolerance) ++j;
    support.push_back(rep);
    counts.emplace_back(static_cast<unsigned long>(j - i));
    i = j;
  }
  return detail::finish_pmf(values.size(), k, std::move(support), std::move(counts));
}

namespace detail {

inline std::int64_t bin_of(double sum, double granularity) {
  return static_cast<std::int64_t>(std::floor(sum / granularity + 0.5));
}

// Number of unordered distinct-index triples with sum < t, by inclusion-
// exclusion over ordered triples with repetition.
struct TripleCounter {
  std::vector<double> x;          // sorted values
  std::vector<double> pair_sums;  // sorted sums over index pairs j < l

  explicit TripleCounter(std::span<const double> values) : x(values.begin(), values.end()) {
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    pair_sums.reserve(n * (n - 1) / 2);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t l = j + 1; l < n; ++l) pair_sums.push_back(x[j] + x[l]);
    std::sort(pair_sums.begin(), pair_sums.end());
  }

  std::uint64_t below(const std::vector<double>& v, double u) const {
    return static_cast<std::uint64_t>(std::lower_bound(v.begin(), v.end(), u) - v.begin());
  }

  std::uint64_t ordered_pairs_below(double u) const {
    // (j, l) ordered, j == l allowed.
    return 2 * below(pair_sums, u) + below(x, 0.5 * u);
  }

  std::uint64_t count_below(double t) const {
    __int128 n3 = 0;
    __int128 n21 = 0;
    __int128 n111 = 0;
    for (const double xi : x) {
      n3 += ordered_pairs_below(t - xi);
      n21 += below(x, t - 2.0 * xi);
      if (3.0 * xi < t) ++n111;
    }
    const __int128 distinct = n3 - 3 * n21 + 2 * n111;
    const __int128 unordered = (distinct + 3) / 6;
    return unordered < 0 ? 0 : static_cast<std::uint64_t>(unordered);
  }
};

} // namespace detail

/// Exact counts of k-subsets per bin of width `granularity`, bins centred on
/// integer multiples of it (bin b holds sums in [(b - 1/2) g, (b + 1/2) g)).
/// Support holds only occupied bins. Sets that are integral in units of g go
/// through the sum histogram; k <= 3 uses direct pair counting and sorted
/// pair sums, so n in the thousands stays feasible; otherwise enumeration.
inline ExactSumPmf exact_binned_pmf(std::span<const double> values, std::size_t k, double granularity,
                                    const ExactLimits& limits = {}) {
  detail::check_values(values);
  detail::check_k(k, values.size());
  if (!(granularity > 0.0)) throw DomainError("granularity must be positive");
  const std::size_t n = values.size();

  std::vector<double> scaled(values.begin(), values.end());
  for (double& v : scaled) v /= granularity;
  if (detail::all_integral(scaled)) {
    try {
      const auto ints = detail::to_integers(scaled);
      return detail::pmf_from_histogram(n, k, detail::sum_histogram(ints, k, limits), granularity);
    } catch (const InfeasibleError&) {
    }
  }

  auto from_bins = [&](std::vector<std::pair<std::int64_t, std::uint64_t>> bins) {
    std::vector<double> support;
    std::vector<BigInt> counts;
    for (const auto& [b, c] : bins) {
      if (c == 0) continue;
      support.push_back(static_cast<double>(b) * granularity);
      counts.emplace_back(static_cast<unsigned long>(c));
    }
    return detail::finish_pmf(n, k, std::move(support), std::move(counts));
  };
  auto histogram = [&](const std::vector<double>& sums) {
    std::vector<std::int64_t> b;
    b.reserve(sums.size());
    for (const double s : sums) b.push_back(detail::bin_of(s, granularity));
    std::sort(b.begin(), b.end());
    std::vector<std::pair<std::int64_t, std::uint64_t>> bins;
    for (const std::int64_t v : b)
      if (!bins.empty() && bins.back().first == v) ++bins.back().second;
      else bins.emplace_back(v, 1);
    return bins;
  };

  if (k == 1) return from_bins(histogram(std::vector<double>(values.begin(), values.end())));
  const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  if (k <= 3 && pairs <= limits.max_pmf_subsets) {
    if (k == 2) {
      std::vector<double> sums;
      sums.reserve(pairs);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) sums.push_back(values[i] + values[j]);
      return from_bins(histogram(sums));
    }
    const detail::TripleCounter counter(values);
    const auto& x = counter.x;
    const std::int64_t first = detail::bin_of(x[0] + x[1] + x[2], granularity);
    const std::int64_t last = detail::bin_of(x[n - 1] + x[n - 2] + x[n - 3], granularity);
    std::vector<std::pair<std::int64_t, std::uint64_t>> bins;
    std::uint64_t prev = 0;
    for (std::int64_t b = first; b <= last; ++b) {
      const std::uint64_t upto = b == last ? binomial(n, 3).get_ui()
                                           : counter.count_below((static_cast<double>(b) + 0.5) * granularity);
      bins.emplace_back(b, upto >= prev ? upto - prev : 0);
      prev = std::max(prev, upto);
    }
    return from_bins(std::move(bins));
  }
  return from_bins(histogram(detail::all_k_sums(values, k, limits)));
}

} // namespace perfsum
