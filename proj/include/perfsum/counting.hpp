#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bigint.hpp"
#include "error.hpp"
#include "parallel.hpp"

namespace perfsum {

/// sum over k of round_half_even(p[k] * C(n, k)) by computing every term.
/// Index 0 of `p` is ignored. Quadratic in n in big-integer work; this is
/// the reference route for rounded_binomial_total.
inline BigInt naive_rounded_binomial_total(std::uint64_t n, std::span<const double> p) {
  BigInt total = 0;
  for (std::uint64_t k = 1; k < p.size() && k <= n; ++k)
    if (p[k] != 0.0) total += scale_round_half_even(p[k], binomial(n, k));
  return total;
}

namespace detail {

struct SplitTerm {
  BigInt p;  // product of numerators (n - i + 1)
  BigInt q;  // product of denominators i
  BigInt t;  // weighted partial sums, see rounded_binomial_total
};

// Over i in [lo, hi): p(i) = n - i + 1, q(i) = i and
//   t = sum_j w_j * prod_{i=lo..j} p(i) * prod_{i=j+1..hi-1} q(i),
// so that t / q = sum_j w_j prod_{i=lo..j} p(i)/q(i).
inline SplitTerm split_sum(std::uint64_t n, std::uint64_t lo, std::uint64_t hi, std::span<const BigInt> weight,
                           std::uint64_t base, bool need_p) {
  if (hi - lo <= 8) {
    SplitTerm r{1, 1, 0};
    for (std::uint64_t i = lo; i < hi; ++i) {
      const auto pi = static_cast<unsigned long>(n - i + 1);
      const auto qi = static_cast<unsigned long>(i);
      r.p *= pi;
      r.t *= qi;
      const BigInt& w = weight[i - base];
      if (sgn(w) != 0) r.t += w * r.p;
      r.q *= qi;
    }
    return r;
  }
  const std::uint64_t mid = lo + (hi - lo) / 2;
  SplitTerm left = split_sum(n, lo, mid, weight, base, true);
  SplitTerm right = split_sum(n, mid, hi, weight, base, need_p);
  SplitTerm r;
  r.t = left.t * right.q + left.p * right.t;
  r.q = left.q * right.q;
  if (need_p) r.p = left.p * right.p;
  return r;
}

inline unsigned popcount64(std::uint64_t v) { return static_cast<unsigned>(std::popcount(v)); }

inline std::uint64_t odd_part(std::uint64_t v, unsigned& twos) {
  const auto z = static_cast<unsigned>(std::countr_zero(v));
  twos += z;
  return v >> z;
}


// sum_{k=lo..hi} weight[k - lo] * C(n, k), lo >= 1. Blocks of about
// n / log2(n) terms keep the split products near the size of C(n, k)
// itself; each block is anchored on its own exact binomial.
inline BigInt weighted_binomial_sum(std::uint64_t n, std::uint64_t lo, std::uint64_t hi,
                                    std::span<const BigInt> weight) {
  const std::uint64_t block =
      std::max<std::uint64_t>(64, n / std::max(1U, static_cast<unsigned>(std::bit_width(n))));
  std::vector<std::uint64_t> starts;
  for (std::uint64_t a = lo; a <= hi; a += block) starts.push_back(a);
  std::vector<BigInt> partial(starts.size());
  parallel_for(starts.size(), [&](std::size_t b) {
    const std::uint64_t a = starts[b];
    const std::uint64_t last = std::min(hi, a + block - 1);
    const BigInt& w0 = weight[a - lo];
    if (last == a) {
      partial[b] = w0 * binomial(n, a);
      return;
    }
    SplitTerm s = split_sum(n, a + 1, last + 1, weight, lo, false);
    BigInt acc = w0 * s.q + s.t;
    acc *= binomial(n, a);
    mpz_divexact(acc.get_mpz_t(), acc.get_mpz_t(), s.q.get_mpz_t());
    partial[b] = std::move(acc);
  });
  BigInt out = 0;
  for (const BigInt& v : partial) out += v;
  return out;
}

// sum_{k=lo..hi} C(n, k); lo == 0 is allowed.
inline BigInt binomial_range_sum(std::uint64_t n, std::uint64_t lo, std::uint64_t hi) {
  if (lo > hi) return 0;
  BigInt out = lo == 0 ? BigInt(1) : BigInt(0);
  lo = std::max<std::uint64_t>(lo, 1);
  if (lo > hi) return out;
  const std::vector<BigInt> ones(hi - lo + 1, BigInt(1));
  return out + weighted_binomial_sum(n, lo, hi, ones);
}

// sum_{k=a..n} C(n, k) through whichever of the direct sum, the complement
// 2^n - sum_{k<a}, or the symmetric form (2^n - sum_{n-a<k<a}) / 2 is shortest.
inline BigInt binomial_tail(std::uint64_t n, std::uint64_t a) {
  BigInt full = 1;
  full <<= n;
  if (a == 0) return full;
  if (a > n) return 0;
  const std::uint64_t direct = n - a + 1;
  const std::uint64_t complement = a;
  const std::uint64_t middle = 2 * a > n ? 2 * a - n - 1 : direct + complement;
  if (direct <= complement && direct <= middle) return binomial_range_sum(n, a, n);
  if (complement <= middle) return full - binomial_range_sum(n, 0, a - 1);
  BigInt out = full - binomial_range_sum(n, n - a + 1, a - 1);
  mpz_divexact_ui(out.get_mpz_t(), out.get_mpz_t(), 2);
  return out;
}
} // namespace detail

/// Exact sum over k of round_half_even(p[k] * C(n, k)), each product taken
/// on the exact binary value of p[k]. Index 0 of `p` is ignored; entries
/// must lie in [0, 1].
///
/// With p[k] = m_k 2^-s_k and S = max s_k:
///   2^S * total = sum_k m_k 2^(S - s_k) C(n, k) + sum_k 2^S * (rounding error of term k).
/// The weighted binomial sum is evaluated by binary splitting on the ratio
/// C(n, k) / C(n, k - 1) = (n - k + 1) / k. Each rounding error needs only
/// C(n, k) mod 2^(s_k + 1), tracked as 2^v(k) times an odd residue with
/// v(k) = popcount(k) + popcount(n - k) - popcount(n).
/// Runs of p = 1 at either end (the common ge / le shape) reduce to binomial
/// tails, which cost only the terms between the run and its mirror image.
inline BigInt rounded_binomial_total(std::uint64_t n, std::span<const double> p) {
  const std::uint64_t last = std::min<std::uint64_t>(n, p.empty() ? 0 : p.size() - 1);
  std::uint64_t kmin = 0;
  std::uint64_t kmax = 0;
  unsigned long scale = 0;
  for (std::uint64_t k = 1; k <= last; ++k) {
    const double v = p[k];
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("probability outside [0, 1]");
    if (v == 0.0) continue;
    if (kmin == 0) kmin = k;
    kmax = k;
  }
  if (kmin == 0) return 0;

  // Runs of p = 1 touching k = n or k = 1 are plain binomial tails.
  BigInt ones = 0;
  if (kmax == n && p[n] == 1.0) {
    std::uint64_t a = n;
    while (a > kmin && p[a - 1] == 1.0) --a;
    ones += detail::binomial_tail(n, a);
    if (a == kmin) return ones;
    kmax = a - 1;
    while (p[kmax] == 0.0) --kmax;
  }
  if (kmin == 1 && p[1] == 1.0) {
    std::uint64_t b = 1;
    while (b < kmax && p[b + 1] == 1.0) ++b;
    ones += detail::binomial_tail(n, n - b) - 1;  // sum_{k=0..b} = sum_{k=n-b..n}
    if (b == kmax) return ones;
    kmin = b + 1;
    while (p[kmin] == 0.0) ++kmin;
  }
  for (std::uint64_t k = kmin; k <= kmax; ++k)
    if (p[k] != 0.0) {
      const DyadicDouble d = to_dyadic(p[k]);
      if (d.exponent < 0) scale = std::max(scale, static_cast<unsigned long>(-d.exponent));
    }

  // Integer weights m_k 2^(S - s_k).
  std::vector<BigInt> weight(kmax - kmin + 1);
  std::vector<std::uint64_t> fractional;  // k whose term is not an integer multiple
  for (std::uint64_t k = kmin; k <= kmax; ++k) {
    if (p[k] == 0.0) continue;
    const DyadicDouble d = to_dyadic(p[k]);
    BigInt w = static_cast<long>(d.mantissa);
    w <<= static_cast<unsigned long>(static_cast<long>(scale) + d.exponent);
    weight[k - kmin] = std::move(w);
    if (d.exponent < 0) fractional.push_back(k);
  }

  BigInt scaled = kmin <= kmax ? detail::weighted_binomial_sum(n, kmin, kmax, weight) : BigInt(0);

  if (!fractional.empty()) {
    // Residues modulo 2^bits of the odd part of C(n, k), walked upward from
    // the first fractional k.
    const unsigned long bits = scale + 1;
    const std::uint64_t k0 = fractional.front();
    BigInt modulus = 1;
    modulus <<= bits;
    BigInt numer = binomial(n, k0);
    mpz_fdiv_q_2exp(numer.get_mpz_t(), numer.get_mpz_t(), mpz_scan1(numer.get_mpz_t(), 0));
    mpz_fdiv_r_2exp(numer.get_mpz_t(), numer.get_mpz_t(), bits);
    BigInt denom = 1;
    BigInt inverse;
    BigInt residue;
    std::uint64_t at = k0;
    for (const std::uint64_t k : fractional) {
      for (; at < k; ++at) {
        unsigned ignored = 0;
        numer *= static_cast<unsigned long>(detail::odd_part(n - at, ignored));
        mpz_fdiv_r_2exp(numer.get_mpz_t(), numer.get_mpz_t(), bits);
        denom *= static_cast<unsigned long>(detail::odd_part(at + 1, ignored));
        mpz_fdiv_r_2exp(denom.get_mpz_t(), denom.get_mpz_t(), bits);
      }
      const unsigned v = detail::popcount64(k) + detail::popcount64(n - k) - detail::popcount64(n);
      const DyadicDouble d = to_dyadic(p[k]);
      const auto s = static_cast<unsigned long>(-d.exponent);
      if (v > s) continue;  // C(n, k) divisible by 2^(s+1): the term is an integer
      mpz_invert(inverse.get_mpz_t(), denom.get_mpz_t(), modulus.get_mpz_t());
      residue = numer * inverse;
      residue *= static_cast<long>(d.mantissa);
      residue <<= v;
      mpz_fdiv_r_2exp(residue.get_mpz_t(), residue.get_mpz_t(), s + 1);
      // residue = (m_k C(n, k)) mod 2^(s+1); bit s is the parity of the floor.
      const bool floor_odd = mpz_tstbit(residue.get_mpz_t(), s) != 0;
      mpz_fdiv_r_2exp(residue.get_mpz_t(), residue.get_mpz_t(), s);
      BigInt half = 1;
      half <<= s - 1;
      const int c = cmp(residue, half);
      BigInt correction;
      if (c > 0 || (c == 0 && floor_odd)) {
        correction = 1;
        correction <<= s;
        correction -= residue;
      } else {
        correction = -residue;
      }
      correction <<= scale - s;
      scaled += correction;
    }
  }

  BigInt total;
  mpz_fdiv_q_2exp(total.get_mpz_t(), scaled.get_mpz_t(), scale);
  return total + ones;
}

} // namespace perfsum
