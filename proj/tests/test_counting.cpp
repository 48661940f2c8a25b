#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include <perfsum/counting.hpp>

using namespace perfsum;

namespace {

// round-half-even of p * C, from the exact rational p = m / 2^e
mpz_class oracle_term(double p, const mpz_class& c) {
  mpq_class prod = mpq_class(p) * c;
  mpz_class fl;
  mpz_fdiv_q(fl.get_mpz_t(), prod.get_num_mpz_t(), prod.get_den_mpz_t());
  const mpq_class frac = prod - fl;
  const int cmp_half = cmp(frac, mpq_class(1, 2));
  if (cmp_half > 0 || (cmp_half == 0 && mpz_odd_p(fl.get_mpz_t()))) fl += 1;
  return fl;
}

mpz_class oracle_total(std::uint64_t n, const std::vector<double>& p) {
  mpz_class c = 1, tot = 0;  // c = C(n, k) by the multiplicative recurrence
  for (std::uint64_t k = 1; k <= n && k < p.size(); ++k) {
    c = c * (n - k + 1) / k;
    if (p[k] != 0) tot += oracle_term(p[k], c);
  }
  return tot;
}

double draw(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0, 1);
  switch (g() % 8) {
    case 0: return 0.0;
    case 1: return 1.0;
    case 2: return 0.5;
    case 3: return u(g) * 1e-300;
    case 4: return std::numeric_limits<double>::denorm_min() * static_cast<double>(g() % 50);
    case 5: return std::ldexp(static_cast<double>(g() % 64 + 1), -6 - static_cast<int>(g() % 12));  // dyadic, ties
    default: return u(g);
  }
}

} // namespace

TEST_CASE("naive total matches the rational oracle") {
  std::mt19937_64 g(1);
  for (int t = 0; t < 40; ++t) {
    const std::uint64_t n = 1 + g() % 120;
    std::vector<double> p(n + 1);
    for (auto& v : p) v = std::min(1.0, draw(g));
    CHECK(naive_rounded_binomial_total(n, p) == oracle_total(n, p));
  }
}

TEST_CASE("fast total equals the naive route", "[property]") {
  std::mt19937_64 g(2);
  for (int t = 0; t < 300; ++t) {
    const std::uint64_t n = 1 + g() % (t < 250 ? 200 : 3000);
    std::vector<double> p(n + 1);
    for (auto& v : p) v = std::min(1.0, draw(g));
    const std::uint64_t a = g() % (n + 1);
    const std::uint64_t b = a + g() % (n + 1 - a);
    switch (t % 6) {  // constant runs like ge / le queries
      case 0: for (std::uint64_t k = 0; k <= n; ++k) p[k] = k < a ? 0.0 : k < b ? draw(g) : 1.0; break;
      case 1: for (std::uint64_t k = 0; k <= n; ++k) p[k] = k < a ? 1.0 : k < b ? draw(g) : 0.0; break;
      case 2: for (std::uint64_t k = 0; k <= n; ++k) p[k] = k < a ? 1.0 : k < b ? draw(g) : 1.0; break;
      case 3: for (std::uint64_t k = 0; k <= n; ++k) p[k] = k < a ? 0.0 : 1.0; break;
      default: break;
    }
    REQUIRE(rounded_binomial_total(n, p) == naive_rounded_binomial_total(n, p));
  }
}

TEST_CASE("fast total edge cases") {
  std::vector<double> none;
  CHECK(rounded_binomial_total(10, none) == 0);
  std::vector<double> zeros(11, 0.0);
  CHECK(rounded_binomial_total(10, zeros) == 0);
  std::vector<double> ones(11, 1.0);
  CHECK(rounded_binomial_total(10, ones) == 1023);  // index 0 ignored
  for (std::uint64_t n : {1, 2, 3, 7, 8, 64, 101})
    for (std::uint64_t a = 1; a <= n; ++a) {
      std::vector<double> top(n + 1, 0.0), bottom(n + 1, 0.0);
      for (std::uint64_t k = a; k <= n; ++k) top[k] = 1.0;
      for (std::uint64_t k = 1; k <= a; ++k) bottom[k] = 1.0;
      REQUIRE(rounded_binomial_total(n, top) == naive_rounded_binomial_total(n, top));
      REQUIRE(rounded_binomial_total(n, bottom) == naive_rounded_binomial_total(n, bottom));
    }
  std::vector<double> half(5, 0.5);
  // C(4,k)/2 = 2, 3, 2, 0.5 -> 0 (half even)
  CHECK(rounded_binomial_total(4, half) == 7);
  // shorter vector than n + 1
  std::vector<double> head{0, 1, 1};
  CHECK(rounded_binomial_total(50, head) == 50 + 1225);
  std::vector<double> bad{0, 1.5};
  CHECK_THROWS_AS(rounded_binomial_total(3, bad), DomainError);
  std::vector<double> nan{0, NAN};
  CHECK_THROWS_AS(rounded_binomial_total(3, nan), DomainError);
}

TEST_CASE("fast total at large n against the naive route on a window") {
  const std::uint64_t n = 200'000;
  std::vector<double> p(n + 1, 0.0);
  std::mt19937_64 g(3);
  for (std::uint64_t k = n / 2 - 300; k <= n / 2 + 300; ++k) p[k] = draw(g);
  for (std::uint64_t k = n / 2 + 301; k <= n; ++k) p[k] = 1.0;
  for (std::uint64_t k = 1; k < 200; ++k) p[k] = 1.0;
  // by symmetry the upper tail is half of what the central window leaves
  mpz_class central = 0;
  for (std::uint64_t k = n / 2 - 300; k <= n / 2 + 300; ++k) central += binomial(n, k);
  mpz_class tail = ((mpz_class(1) << n) - central) / 2;
  mpz_class head = 0;
  for (std::uint64_t k = 1; k < 200; ++k) head += binomial(n, k);
  std::vector<double> window(p);
  for (std::uint64_t k = n / 2 + 301; k <= n; ++k) window[k] = 0.0;
  for (std::uint64_t k = 1; k < 200; ++k) window[k] = 0.0;
  CHECK(rounded_binomial_total(n, p) == naive_rounded_binomial_total(n, window) + tail + head);
}
