#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "error.hpp"

namespace perfsum {

/// Summary of the full input set. Variance uses the population divisor n;
/// the finite-population moment identities below are exact only under
/// that convention.
struct SetStatistics {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
};

inline SetStatistics set_statistics(std::span<const double> values) {
  if (values.empty()) throw InputError("empty set");
  double sum = 0.0;
  bool constant = true;
  for (const double v : values) {
    if (!std::isfinite(v)) throw InputError("non-finite element");
    sum += v;
    constant = constant && v == values.front();
  }
  if (constant) return {values.size(), values.front(), 0.0};
  const auto n = static_cast<double>(values.size());
  const double mean = sum / n;
  // Corrected two-pass variance (Chan, Golub & LeVeque).
  double sq = 0.0;
  double comp = 0.0;
  for (const double v : values) {
    const double d = v - mean;
    sq += d * d;
    comp += d;
  }
  double variance = (sq - comp * comp / n) / n;
  if (variance < 0.0) variance = 0.0;
  return {values.size(), mean, variance};
}

namespace detail {
inline void check_subset_size(std::size_t k, std::size_t n) {
  if (k == 0 || k > n)
    throw DomainError("subset size k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
}
} // namespace detail

/// P(x in S_k) for a fixed element x.
inline double membership_probability(std::size_t k, std::size_t n) {
  detail::check_subset_size(k, n);
  return static_cast<double>(k) / static_cast<double>(n);
}

/// E[sum of a uniformly random k-subset] = k * mean.
inline double subset_sum_mean(const SetStatistics& stats, std::size_t k) {
  detail::check_subset_size(k, stats.n);
  return static_cast<double>(k) * stats.mean;
}

/// Var[sum of a uniformly random k-subset] = k sigma^2 (1 - (k-1)/(n-1)).
/// The correction term is taken as 0 for k = 1, which also covers n = 1.
inline double subset_sum_variance(const SetStatistics& stats, std::size_t k) {
  detail::check_subset_size(k, stats.n);
  if (k == stats.n) return 0.0;
  const auto kd = static_cast<double>(k);
  const double correction =
      k == 1 ? 0.0 : (kd - 1.0) / (static_cast<double>(stats.n) - 1.0);
  const double v = kd * stats.variance * (1.0 - correction);
  return v < 0.0 ? 0.0 : v;
}

/// Cov[x1, x2] for two distinct members of a random subset: -sigma^2/(n-1).
inline double pair_covariance(const SetStatistics& stats) {
  if (stats.n < 2) throw DomainError("covariance undefined");
  const double c = -stats.variance / (static_cast<double>(stats.n) - 1.0);
  return c == 0.0 ? 0.0 : c;
}

/// E[x1 * x2] for two distinct members: mean^2 - sigma^2/(n-1).
inline double pair_product_expectation(const SetStatistics& stats) {
  if (stats.n < 2) throw DomainError("pair product expectation undefined for n = 1");
  return stats.mean * stats.mean + pair_covariance(stats);
}

} // namespace perfsum
