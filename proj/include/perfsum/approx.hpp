#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "error.hpp"
#include "moments.hpp"
#include "relation.hpp"

namespace perfsum {

enum class DistributionKind { normal, irwin_hall, chi_square_sum, degenerate };

inline std::string_view to_string(DistributionKind k) {
  switch (k) {
    case DistributionKind::normal: return "normal";
    case DistributionKind::irwin_hall: return "irwin_hall";
    case DistributionKind::chi_square_sum: return "chi_square_sum";
    case DistributionKind::degenerate: return "degenerate";
  }
  return "?";
}

/// Largest term count for which the Irwin-Hall CDF is evaluated exactly;
/// above it the distribution is replaced by its moment-matched normal.
inline constexpr std::size_t kIrwinHallExactMax = 40;

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }
inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// CDF of the sum of `terms` standard uniforms at y, through the recurrence
//   F_m(y) = (y F_{m-1}(y) + (m - y) F_{m-1}(y - 1)) / m,
// whose coefficients are nonnegative on 0 <= y <= m. This is the same
// piecewise polynomial as the alternating-sum formula without its
// cancellation.
inline double irwin_hall_cdf(std::size_t terms, double y) {
  const auto kd = static_cast<double>(terms);
  if (!(y > 0.0)) return 0.0;
  if (y >= kd) return 1.0;
  std::vector<double> level(terms + 1);
  for (std::size_t j = 0; j <= terms; ++j) level[j] = y - static_cast<double>(j) >= 0.0 ? 1.0 : 0.0;
  for (std::size_t m = 1; m <= terms; ++m) {
    const auto md = static_cast<double>(m);
    for (std::size_t j = 0; j + m <= terms; ++j) {
      const double z = y - static_cast<double>(j);
      if (z <= 0.0) level[j] = 0.0;
      else if (z >= md) level[j] = 1.0;
      else level[j] = (z * level[j] + (md - z) * level[j + 1]) / md;
    }
  }
  return level[0];
}

} // namespace detail

/// Approximating law for a subset sum: CDF, survival, interval mass, density.
class SumDistribution {
public:
  static SumDistribution normal(double mean, double variance) {
    if (!(variance >= 0.0) || !std::isfinite(mean)) throw DomainError("normal: invalid parameters");
    if (variance == 0.0) return degenerate(mean);
    SumDistribution d(DistributionKind::normal, mean, variance);
    return d;
  }

  static SumDistribution degenerate(double atom) {
    if (!std::isfinite(atom)) throw DomainError("degenerate: non-finite atom");
    return {DistributionKind::degenerate, atom, 0.0};
  }

  /// Sum of `terms` i.i.d. uniforms on [low, high].
  static SumDistribution irwin_hall(std::size_t terms, double low, double high) {
    if (terms == 0) throw DomainError("irwin_hall: terms must be >= 1");
    if (!(low < high) || !std::isfinite(low) || !std::isfinite(high)) throw DomainError("irwin_hall: requires low < high");
    const auto kd = static_cast<double>(terms);
    const double width = high - low;
    SumDistribution d(DistributionKind::irwin_hall, kd * (low + high) / 2.0, kd * width * width / 12.0);
    d.terms_ = terms;
    d.low_ = low;
    d.width_ = width;
    return d;
  }

  /// Chi-square with `dof` degrees of freedom.
  static SumDistribution chi_square(double dof) {
    if (!(dof > 0.0) || !std::isfinite(dof)) throw DomainError("chi_square: degrees of freedom must be positive");
    SumDistribution d(DistributionKind::chi_square_sum, dof, 2.0 * dof);
    d.dof_ = dof;
    return d;
  }

  DistributionKind kind() const { return kind_; }
  double mean() const { return mean_; }
  double variance() const { return variance_; }
  bool is_degenerate() const { return kind_ == DistributionKind::degenerate; }
  /// Atom of a degenerate distribution (its mean).
  double atom() const { return mean_; }

  std::size_t terms() const { return terms_; }
  double low() const { return low_; }
  double high() const { return low_ + width_; }
  double dof() const { return dof_; }

  /// True when an Irwin-Hall distribution is evaluated via its normal limit.
  bool uses_normal_limit() const { return kind_ == DistributionKind::irwin_hall && terms_ > kIrwinHallExactMax; }

  /// P(X <= x).
  double cdf(double x) const {
    switch (kind_) {
      case DistributionKind::degenerate: return x >= mean_ ? 1.0 : 0.0;
      case DistributionKind::normal: return detail::normal_cdf(standardize(x));
      case DistributionKind::irwin_hall: {
        if (uses_normal_limit()) return detail::normal_cdf(standardize(x));
        const double y = (x - static_cast<double>(terms_) * low_) / width_;
        const auto kd = static_cast<double>(terms_);
        if (y > kd / 2.0) return 1.0 - detail::irwin_hall_cdf(terms_, kd - y);
        return detail::irwin_hall_cdf(terms_, y);
      }
      case DistributionKind::chi_square_sum:
        if (x <= 0.0) return 0.0;
        if (std::isinf(x)) return 1.0;
        return boost::math::gamma_p(dof_ / 2.0, x / 2.0);
    }
    return 0.0;
  }

  /// P(X > x), evaluated without cancellation in the upper tail.
  double sf(double x) const {
    switch (kind_) {
      case DistributionKind::degenerate: return x >= mean_ ? 0.0 : 1.0;
      case DistributionKind::normal: return detail::normal_sf(standardize(x));
      case DistributionKind::irwin_hall: {
        if (uses_normal_limit()) return detail::normal_sf(standardize(x));
        const double y = (x - static_cast<double>(terms_) * low_) / width_;
        const auto kd = static_cast<double>(terms_);
        if (y < kd / 2.0) return 1.0 - detail::irwin_hall_cdf(terms_, y);
        return detail::irwin_hall_cdf(terms_, kd - y);
      }
      case DistributionKind::chi_square_sum:
        if (x <= 0.0) return 1.0;
        if (std::isinf(x)) return 0.0;
        return boost::math::gamma_q(dof_ / 2.0, x / 2.0);
    }
    return 0.0;
  }

  /// P(a < X <= b); zero when b <= a.
  double mass(double a, double b) const {
    if (!(b > a)) return 0.0;
    const double m = a >= mean_ ? sf(a) - sf(b) : cdf(b) - cdf(a);
    return std::clamp(m, 0.0, 1.0);
  }

  /// Density; a degenerate distribution has none and reports +inf at its atom.
  double density(double x) const {
    switch (kind_) {
      case DistributionKind::degenerate: return x == mean_ ? std::numeric_limits<double>::infinity() : 0.0;
      case DistributionKind::normal: return detail::normal_pdf(standardize(x)) / std::sqrt(variance_);
      case DistributionKind::irwin_hall: {
        if (uses_normal_limit()) return detail::normal_pdf(standardize(x)) / std::sqrt(variance_);
        const double y = (x - static_cast<double>(terms_) * low_) / width_;
        if (terms_ == 1) return (y >= 0.0 && y <= 1.0) ? 1.0 / width_ : 0.0;
        const double f = detail::irwin_hall_cdf(terms_ - 1, y) - detail::irwin_hall_cdf(terms_ - 1, y - 1.0);
        return std::max(f, 0.0) / width_;
      }
      case DistributionKind::chi_square_sum:
        if (x <= 0.0) return 0.0;
        return 0.5 * boost::math::gamma_p_derivative(dof_ / 2.0, x / 2.0);
    }
    return 0.0;
  }

private:
  SumDistribution(DistributionKind kind, double mean, double variance)
      : kind_(kind), mean_(mean), variance_(variance) {}

  double standardize(double x) const { return (x - mean_) / std::sqrt(variance_); }

  DistributionKind kind_;
  double mean_;
  double variance_;
  std::size_t terms_ = 0;
  double low_ = 0.0;
  double width_ = 1.0;
  double dof_ = 0.0;
};

/// Finite-population normal law for the size-k subset sum; degenerate when
/// the variance vanishes (k = n or a constant set).
inline SumDistribution normal_sum_approx(const SetStatistics& stats, std::size_t k) {
  return SumDistribution::normal(subset_sum_mean(stats, k), subset_sum_variance(stats, k));
}

/// Sum of k i.i.d. uniforms on [low, high] (no finite-population correction).
inline SumDistribution irwin_hall_sum(std::size_t k, double low, double high) {
  return SumDistribution::irwin_hall(k, low, high);
}

/// Sum of k i.i.d. chi-square(df) variables, i.e. chi-square(k * df).
inline SumDistribution chi_square_sum(std::size_t k, double df) {
  if (!(df > 0.0)) throw DomainError("chi_square_sum: df must be positive");
  if (k == 0) throw DomainError("chi_square_sum: k must be >= 1");
  return SumDistribution::chi_square(static_cast<double>(k) * df);
}

/// Relative radius within which a degenerate atom counts as equal to T.
inline constexpr double kAtomTolerance = 1e-9;

namespace detail {

template <class Law>
double windowed_probability(const Law& law, double target, Relation relation, double granularity) {
  if (!(granularity >= 0.0)) throw DomainError("granularity must be nonnegative");
  const double half = granularity / 2.0;
  switch (relation) {
    case Relation::eq:
      if (granularity == 0.0)
        throw DomainError("eq query on a continuous distribution needs granularity > 0 (exact sums have probability 0)");
      return std::clamp(law.mass(target - half, target + half), 0.0, 1.0);
    case Relation::ge: return std::clamp(law.sf(target - half), 0.0, 1.0);
    case Relation::le: return std::clamp(law.cdf(target + half), 0.0, 1.0);
  }
  return 0.0;
}

} // namespace detail

/// P(sum {=,>=,<=} T) under `dist`. For g > 0 the query is continuity
/// corrected: eq is the mass on (T - g/2, T + g/2], ge is P(X > T - g/2),
/// le is P(X <= T + g/2). Degenerate laws compare their atom with T.
inline double probability_query(const SumDistribution& dist, double target, Relation relation, double granularity) {
  if (!(granularity >= 0.0)) throw DomainError("granularity must be nonnegative");
  if (dist.is_degenerate()) {
    const double tol = kAtomTolerance * std::max(1.0, std::fabs(target));
    const double a = dist.atom();
    switch (relation) {
      case Relation::eq: return std::fabs(a - target) <= tol ? 1.0 : 0.0;
      case Relation::ge: return a >= target - tol ? 1.0 : 0.0;
      case Relation::le: return a <= target + tol ? 1.0 : 0.0;
    }
  }
  return detail::windowed_probability(dist, target, relation, granularity);
}

/// Terms of the finite-population Berry-Esseen bound, without the absolute
/// constant. Each element is treated as a degenerate random variable equal
/// to its (standardized) value.
struct BerryEsseenTerms {
  double p = 0.0;
  double q = 0.0;
  double b = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double bound_over_C = 0.0;
};

namespace detail {

// Third and second absolute moments of the standardized set.
struct BerryEsseenMoments {
  double m2 = 0.0;
  double m3 = 0.0;
};

inline BerryEsseenMoments berry_esseen_moments(std::span<const double> values, const SetStatistics& stats) {
  if (!(stats.variance > 0.0)) throw DomainError("bound undefined for this input");
  const double sd = std::sqrt(stats.variance);
  BerryEsseenMoments m;
  for (const double v : values) {
    const double z = (v - stats.mean) / sd;
    m.m2 += z * z;
    m.m3 += std::fabs(z) * z * z;
  }
  m.m2 /= static_cast<double>(values.size());
  m.m3 /= static_cast<double>(values.size());
  return m;
}

inline BerryEsseenTerms berry_esseen_from_moments(std::size_t n, std::size_t k, const BerryEsseenMoments& mom) {
  check_subset_size(k, n);
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto nd = static_cast<double>(n);
  const auto kd = static_cast<double>(k);
  BerryEsseenTerms t;
  t.p = kd / nd;
  t.q = (nd - kd) / nd;
  t.b = 1.0 - t.p * mom.m2;
  if (std::fabs(t.b) < 1e-12) t.b = 0.0;
  if (t.b < 0.0) throw DomainError("bound undefined for this input");
  // 1/0 := inf
  auto inv = [](double d) { return d == 0.0 ? inf : 1.0 / d; };
  const double b32 = t.b * std::sqrt(t.b);
  t.delta1 = mom.m3 * inv(std::sqrt(kd) * b32);
  const double shrink = t.q * t.q * t.q;  // E|z - p z|^3 = q^3 |z|^3
  t.delta2 = t.b == 0.0 ? inf : mom.m3 * inv(std::sqrt(nd * t.b)) + shrink * mom.m3 * inv(std::sqrt(nd) * b32);
  t.bound_over_C = std::min(t.delta1, t.delta2 + inv(std::sqrt(kd * t.q)));
  return t;
}

} // namespace detail

inline BerryEsseenTerms berry_esseen_terms(std::span<const double> values, std::size_t k) {
  const SetStatistics stats = set_statistics(values);
  detail::check_subset_size(k, stats.n);
  return detail::berry_esseen_from_moments(stats.n, k, detail::berry_esseen_moments(values, stats));
}

} // namespace perfsum
