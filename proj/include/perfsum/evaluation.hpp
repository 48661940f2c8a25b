#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "error.hpp"
#include "exact.hpp"

namespace perfsum {

/// Probability mass on a sorted, duplicate-free support.
struct DiscretePmf {
  std::vector<double> support;
  std::vector<double> mass;
};

/// Result of windowing a continuous law onto a support.
struct Discretized {
  DiscretePmf pmf;
  /// Mass captured by the windows before renormalization.
  double captured_mass = 0.0;
};

inline constexpr double kMinCapturedMass = 1e-6;

inline DiscretePmf to_discrete(const ExactSumPmf& exact) { return {exact.support, exact.mass}; }

/// Integer multiples of g covering [lo, hi].
inline std::vector<double> grid_support(double lo, double hi, double granularity) {
  if (!(granularity > 0.0)) throw DomainError("granularity must be positive");
  const auto first = static_cast<long long>(std::floor(lo / granularity + 0.5));
  const auto last = static_cast<long long>(std::floor(hi / granularity + 0.5));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(0LL, last - first + 1)));
  for (long long b = first; b <= last; ++b) out.push_back(static_cast<double>(b) * granularity);
  return out;
}

/// mass[i] = P(support_i - g/2 < X <= support_i + g/2), renormalized to 1.
/// `Law` is anything with mass(a, b): SumDistribution, KdeModel.
template <class Law>
Discretized discretize(const Law& law, std::span<const double> support, double granularity) {
  if (!(granularity > 0.0)) throw DomainError("granularity must be positive");
  if (!std::is_sorted(support.begin(), support.end())) throw DomainError("support must be sorted");
  Discretized out;
  out.pmf.support.assign(support.begin(), support.end());
  out.pmf.mass.reserve(support.size());
  const double half = granularity / 2.0;
  double captured = 0.0;
  for (const double s : support) {
    const double m = law.mass(s - half, s + half);
    out.pmf.mass.push_back(m);
    captured += m;
  }
  if (!(captured >= kMinCapturedMass)) throw DomainError("support misses the distribution");
  for (double& m : out.pmf.mass) m /= captured;
  out.captured_mass = captured;
  return out;
}

namespace detail {

inline bool same_point(double a, double b) { return std::fabs(a - b) <= 1e-9 * std::max(1.0, std::fabs(a)); }

// Masses of P and Q over the union of their supports, zero-filled.
inline void align(const DiscretePmf& p, const DiscretePmf& q, std::vector<double>& pa, std::vector<double>& qa) {
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < p.support.size() || j < q.support.size()) {
    if (j == q.support.size() || (i < p.support.size() && p.support[i] < q.support[j] &&
                                  !same_point(p.support[i], q.support[j]))) {
      pa.push_back(p.mass[i++]);
      qa.push_back(0.0);
    } else if (i == p.support.size() || !same_point(p.support[i], q.support[j])) {
      pa.push_back(0.0);
      qa.push_back(q.mass[j++]);
    } else {
      pa.push_back(p.mass[i++]);
      qa.push_back(q.mass[j++]);
    }
  }
}

} // namespace detail

/// Discrete Jensen-Shannon divergence with natural log, over the union of
/// supports; 0 log 0 = 0. Lies in [0, ln 2].
inline double js_divergence(const DiscretePmf& p, const DiscretePmf& q) {
  if (p.support.size() != p.mass.size() || q.support.size() != q.mass.size())
    throw DomainError("pmf support and mass lengths differ");
  std::vector<double> pa;
  std::vector<double> qa;
  detail::align(p, q, pa, qa);
  double acc = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double m = 0.5 * (pa[i] + qa[i]);
    const double tp = pa[i] > 0.0 ? 0.5 * pa[i] * std::log(pa[i] / m) : 0.0;
    const double tq = qa[i] > 0.0 ? 0.5 * qa[i] * std::log(qa[i] / m) : 0.0;
    acc += tp + tq;
  }
  return std::clamp(acc, 0.0, std::numbers::ln2);
}

} // namespace perfsum
