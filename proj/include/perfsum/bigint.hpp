#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include <gmpxx.h>

#include "error.hpp"

namespace perfsum {

using BigInt = mpz_class;

/// Exact binomial coefficient C(n, k). Returns 0 when k > n.
inline BigInt binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  BigInt out;
  mpz_bin_uiui(out.get_mpz_t(), static_cast<unsigned long>(n), static_cast<unsigned long>(std::min(k, n - k)));
  return out;
}

/// Signed overload; negative arguments are a domain error.
inline BigInt binomial_checked(long long n, long long k) {
  if (n < 0 || k < 0) throw DomainError("binomial: negative argument");
  return binomial(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k));
}

/// A finite double split as mantissa * 2^exponent with an odd (or zero) mantissa.
struct DyadicDouble {
  std::int64_t mantissa = 0;
  int exponent = 0;
};

inline DyadicDouble to_dyadic(double x) {
  if (!std::isfinite(x)) throw DomainError("to_dyadic: non-finite value");
  if (x == 0.0) return {};
  int e = 0;
  const double frac = std::frexp(x, &e);  // x = frac * 2^e, 0.5 <= |frac| < 1
  auto m = static_cast<std::int64_t>(std::ldexp(frac, 53));
  e -= 53;
  while ((m & 1) == 0) {
    m >>= 1;
    ++e;
  }
  return {m, e};
}

/// Shift right by `bits` with round-half-to-even on the discarded part.
inline BigInt shift_round_half_even(const BigInt& value, unsigned long bits) {
  if (bits == 0) return value;
  BigInt q;
  mpz_fdiv_q_2exp(q.get_mpz_t(), value.get_mpz_t(), bits);
  BigInt r;
  mpz_fdiv_r_2exp(r.get_mpz_t(), value.get_mpz_t(), bits);
  BigInt half = 1;
  half <<= bits - 1;
  const int c = cmp(r, half);
  if (c > 0 || (c == 0 && mpz_odd_p(q.get_mpz_t()))) q += 1;
  return q;
}

/// round_half_even(p * count), evaluated exactly on the binary value of p.
inline BigInt scale_round_half_even(double p, const BigInt& count) {
  const DyadicDouble d = to_dyadic(p);
  if (d.mantissa == 0) return 0;
  BigInt prod = count;
  prod *= static_cast<long>(d.mantissa);
  if (d.exponent >= 0) {
    prod <<= static_cast<unsigned long>(d.exponent);
    return prod;
  }
  return shift_round_half_even(prod, static_cast<unsigned long>(-d.exponent));
}

inline std::string to_decimal(const BigInt& v) { return v.get_str(10); }

/// Double approximation (truncating); saturates to +inf for values beyond the double range.
inline double to_double(const BigInt& v) {
  const std::size_t bits = mpz_sizeinbase(v.get_mpz_t(), 2);
  if (bits > 1023) return sgn(v) < 0 ? -HUGE_VAL : HUGE_VAL;
  return v.get_d();
}

} // namespace perfsum
