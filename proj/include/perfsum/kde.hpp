#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace perfsum {

/// Samples per RNG substream. Fixed so the sample sequence does not depend
/// on the number of workers.
inline constexpr std::size_t kSamplesPerShard = 4096;

/// Default number of sampled subsets per fitted model.
inline constexpr std::size_t kDefaultKdeSamples = 10'000;

/// Quantile of the positive consecutive gaps used as the tophat bandwidth.
inline constexpr double kBandwidthQuantile = 0.10;

/// m sums of independent uniformly random k-subsets (indices drawn without
/// replacement inside a subset; subsets themselves are independent).
/// Deterministic in (values, k, m, seed).
inline std::vector<double> sample_subset_sums(std::span<const double> values, std::size_t k, std::size_t m,
                                              std::uint64_t seed) {
  const std::size_t n = values.size();
  if (n == 0) throw InputError("empty set");
  if (k == 0 || k > n)
    throw DomainError("subset size k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  if (m < 2) throw DomainError("need at least 2 samples (bandwidth undefined)");

  // Draw the smaller of the subset and its complement.
  const bool complement = k > n - k;
  const std::size_t draws = complement ? n - k : k;
  const double total = complement ? std::accumulate(values.begin(), values.end(), 0.0) : 0.0;

  std::vector<double> sums(m);
  const std::size_t shards = (m + kSamplesPerShard - 1) / kSamplesPerShard;
  parallel_for(shards, [&](std::size_t shard) {
    Rng rng(substream_seed(seed, shard));
    std::vector<std::size_t> index(n);
    std::iota(index.begin(), index.end(), std::size_t{0});
    std::vector<std::size_t> swapped(draws);
    const std::size_t end = std::min(m, (shard + 1) * kSamplesPerShard);
    for (std::size_t s = shard * kSamplesPerShard; s < end; ++s) {
      double acc = 0.0;
      for (std::size_t i = 0; i < draws; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(index[i], index[j]);
        swapped[i] = j;
        acc += values[index[i]];
      }
      // Undo the partial shuffle so each draw starts from the identity.
      for (std::size_t i = draws; i-- > 0;) std::swap(index[i], index[swapped[i]]);
      sums[s] = complement ? total - acc : acc;
    }
  });
  return sums;
}

/// Tophat bandwidth: 10% quantile (lower interpolation) of the positive gaps
/// between consecutive sorted sums; max(|mean|, 1) * 1e-6 if every gap is 0.
inline double fit_bandwidth(std::span<const double> sums) {
  if (sums.size() < 2) throw DomainError("bandwidth needs at least 2 sums");
  std::vector<double> sorted(sums.begin(), sums.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> gaps;
  gaps.reserve(sorted.size() - 1);
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (const double d = sorted[i] - sorted[i - 1]; d > 0.0) gaps.push_back(d);
  if (gaps.empty()) {
    const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    return std::max(std::fabs(mean), 1.0) * 1e-6;
  }
  const auto idx = static_cast<std::size_t>(std::floor(kBandwidthQuantile * static_cast<double>(gaps.size() - 1)));
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(idx), gaps.end());
  return gaps[idx];
}

/// Tophat kernel density over sampled subset sums.
class KdeModel {
public:
  KdeModel(std::vector<double> sums, double bandwidth, std::size_t k = 0, std::uint64_t seed = 0)
      : sums_(std::move(sums)), bandwidth_(bandwidth), k_(k), seed_(seed) {
    if (sums_.empty()) throw DomainError("kde: no samples");
    if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) throw DomainError("kde: bandwidth must be positive");
    std::sort(sums_.begin(), sums_.end());
    prefix_.resize(sums_.size() + 1, 0.0);
    for (std::size_t i = 0; i < sums_.size(); ++i) prefix_[i + 1] = prefix_[i] + sums_[i];
  }

  const std::vector<double>& sums() const { return sums_; }  // sorted
  double bandwidth() const { return bandwidth_; }
  std::size_t k() const { return k_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return sums_.size(); }

  /// (1/(m h)) sum K((t - s_i)/h), K = 1/2 on |u| <= 1.
  double density(double t) const {
    const auto lo = std::lower_bound(sums_.begin(), sums_.end(), t - bandwidth_);
    const auto hi = std::upper_bound(sums_.begin(), sums_.end(), t + bandwidth_);
    const auto inside = static_cast<double>(hi - lo);
    return inside / (2.0 * bandwidth_ * static_cast<double>(sums_.size()));
  }

  /// (1/m) sum clamp((t - s_i + h) / 2h, 0, 1).
  double cdf(double t) const {
    const double h = bandwidth_;
    // Samples with s_i <= t - h contribute 1; t - h < s_i < t + h contribute linearly.
    const auto full_end = std::upper_bound(sums_.begin(), sums_.end(), t - h);
    const auto part_end = std::lower_bound(full_end, sums_.end(), t + h);
    const auto i0 = static_cast<std::size_t>(full_end - sums_.begin());
    const auto i1 = static_cast<std::size_t>(part_end - sums_.begin());
    const auto partial_count = static_cast<double>(i1 - i0);
    const double partial_sum = prefix_[i1] - prefix_[i0];
    double partial = ((t + h) * partial_count - partial_sum) / (2.0 * h);
    partial = std::clamp(partial, 0.0, partial_count);
    return std::clamp((static_cast<double>(i0) + partial) / static_cast<double>(sums_.size()), 0.0, 1.0);
  }

  double sf(double t) const { return 1.0 - cdf(t); }

  /// Mass on (a, b].
  double mass(double a, double b) const { return b > a ? std::max(cdf(b) - cdf(a), 0.0) : 0.0; }

private:
  std::vector<double> sums_;
  std::vector<double> prefix_;
  double bandwidth_;
  std::size_t k_;
  std::uint64_t seed_;
};

inline double kde_density(const KdeModel& model, double t) { return model.density(t); }
inline double kde_cdf(const KdeModel& model, double t) { return model.cdf(t); }

/// Samples m subset sums of size k and fits the tophat model.
inline KdeModel fit_kde(std::span<const double> values, std::size_t k, std::size_t m, std::uint64_t seed) {
  std::vector<double> sums = sample_subset_sums(values, k, m, seed);
  const double h = fit_bandwidth(sums);
  return KdeModel(std::move(sums), h, k, seed);
}

} // namespace perfsum
