#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <perfsum/exact.hpp>
#include <perfsum/pipeline.hpp>
#include <perfsum/simulation.hpp>

#include "oracles.hpp"

using namespace perfsum;
using Catch::Matchers::ContainsSubstring;

namespace {

std::vector<double> s1234{1, 2, 3, 4};

ApproxConfig cfg(Relation r, std::optional<double> g = 1.0) {
  ApproxConfig c;
  c.relation = r;
  c.granularity = g;
  return c;
}

mpz_class brute_total(const std::vector<double>& s, double t, int rel) {
  mpz_class tot = 0;
  for (auto& c : oracle::brute_counts(s, t, rel, 0.0)) tot += c;
  return tot;
}

} // namespace

TEST_CASE("approximate_perfect_sum examples") {
  auto r = approximate_perfect_sum(s1234, 5, cfg(Relation::ge));
  CHECK(abs(r.total - 9) <= 2);
  mpz_class sum = 0;
  for (auto& row : r.per_k) sum += *row.count;
  CHECK(sum == r.total);

  std::vector<double> ones(10, 1.0);
  auto c = approximate_perfect_sum(ones, 3, cfg(Relation::eq));
  for (auto& row : c.per_k) CHECK(*row.count == (row.k == 3 ? binomial(10, 3) : mpz_class(0)));
  CHECK(c.total == 120);

  for (auto m : {MethodKind::normal, MethodKind::irwin_hall, MethodKind::chi_square, MethodKind::kde}) {
    auto conf = cfg(Relation::ge);
    conf.method.kind = m;
    conf.method.samples = 500;
    CHECK(approximate_perfect_sum(s1234, 100, conf).total == 0);
  }
}

TEST_CASE("approximate_perfect_sum errors") {
  auto c = cfg(Relation::ge);
  c.k_max = 5;
  CHECK_THROWS_AS(approximate_perfect_sum(s1234, 5, c), DomainError);
  c = cfg(Relation::ge);
  c.k_min = 0;
  CHECK_THROWS_AS(approximate_perfect_sum(s1234, 5, c), DomainError);
  c = cfg(Relation::ge);
  c.k_max = 2;
  c.exact_small_k = 3;
  CHECK_THROWS_AS(approximate_perfect_sum(s1234, 5, c), DomainError);
  std::vector<double> empty;
  CHECK_THROWS_WITH(approximate_perfect_sum(empty, 5, cfg(Relation::ge)), ContainsSubstring("empty set"));

  // eq on a continuous law without a window fails and names the k
  std::vector<double> real{0.5, 1.25, 2.0};
  auto e = cfg(Relation::eq, std::nullopt);
  CHECK_THROWS_WITH(approximate_perfect_sum(real, 2, e), ContainsSubstring("k=1"));

  std::vector<double> same(4, 2.0);
  auto ih = cfg(Relation::ge);
  ih.method.kind = MethodKind::irwin_hall;
  CHECK_THROWS_AS(approximate_perfect_sum(same, 2, ih), DomainError);
}

TEST_CASE("exact_perfect_sum examples") {
  CHECK(exact_perfect_sum(s1234, 5, Relation::eq).total == 2);
  CHECK(exact_perfect_sum(s1234, 5, Relation::ge).total == 9);
  CHECK(exact_perfect_sum(s1234, 0, Relation::le).total == 0);

  std::mt19937_64 g(8);
  auto s = oracle::random_set(g, 20, true, 0, 30);
  for (Relation r : {Relation::eq, Relation::ge, Relation::le}) {
    auto a = exact_perfect_sum(s, 150, r, 0.0, ExactEngine::dp);
    auto b = exact_perfect_sum(s, 150, r, 0.0, ExactEngine::enumerate);
    CHECK(a.method == "dp");
    CHECK(b.method == "enumerate");
    CHECK(a.total == b.total);
    for (std::size_t i = 0; i < a.per_k.size(); ++i) CHECK(*a.per_k[i].count == *b.per_k[i].count);
  }

  std::vector<double> reals{0.5, 1.5};
  CHECK_THROWS_AS(exact_perfect_sum(reals, 1, Relation::ge, 0.0, ExactEngine::dp), InputError);
  std::vector<double> big(40, 1.5);
  CHECK_THROWS_WITH(exact_perfect_sum(big, 10, Relation::ge), ContainsSubstring("approximate mode"));
}

TEST_CASE("exact_perfect_sum against brute force with real targets") {
  std::mt19937_64 g(9);
  for (int t = 0; t < 30; ++t) {
    auto s = oracle::random_set(g, 2 + g() % 10, true, -10, 10);
    const double target = std::uniform_real_distribution<double>(-20, 20)(g);
    CHECK(exact_perfect_sum(s, target, Relation::ge).total == brute_total(s, target, 1));
    CHECK(exact_perfect_sum(s, target, Relation::le).total == brute_total(s, target, 2));
    const double ti = std::round(target);
    CHECK(exact_perfect_sum(s, ti, Relation::eq).total == brute_total(s, ti, 0));
  }
}

TEST_CASE("property: pipeline count bounds and totals", "[property]") {
  std::mt19937_64 g(11);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 2 + g() % 40;
    const bool integer = t % 2 == 0;
    auto s = oracle::random_set(g, n, integer, 0, 20);
    auto c = cfg(static_cast<Relation>(g() % 3), integer ? std::optional<double>{} : std::optional<double>{0.5});
    c.method.kind = static_cast<MethodKind>(g() % 3);
    c.detail = CountDetail::always;
    const double target = std::uniform_real_distribution<double>(0, 20.0 * n)(g);
    auto r = approximate_perfect_sum(s, target, c);
    mpz_class sum = 0;
    for (auto& row : r.per_k) {
      CHECK(row.probability >= 0.0);
      CHECK(row.probability <= 1.0);
      CHECK(*row.count >= 0);
      CHECK(*row.count <= binomial(n, row.k));
      sum += *row.count;
    }
    CHECK(sum == r.total);
    CHECK(r.total <= (mpz_class(1) << n) - 1);
  }
}

TEST_CASE("property: ge total is monotone in the target", "[property]") {
  std::mt19937_64 g(12);
  for (int t = 0; t < 10; ++t) {
    auto s = oracle::random_set(g, 30, t % 2 == 0, 0, 20);
    auto c = cfg(Relation::ge, t % 2 == 0 ? std::optional<double>{} : std::optional<double>{0.25});
    mpz_class prev = -1;
    for (double target = 700; target >= -10; target -= 7.5) {
      auto r = approximate_perfect_sum(s, target, c);
      if (prev >= 0) CHECK(r.total >= prev);
      prev = r.total;
    }
  }
}

TEST_CASE("k = n is a degenerate atom") {
  std::mt19937_64 g(13);
  auto s = oracle::random_set(g, 12, false, 0, 5);
  double sum = 0;
  for (double v : s) sum += v;
  auto c = cfg(Relation::ge, std::nullopt);
  c.k_min = 12;
  auto above = approximate_perfect_sum(s, sum + 1e-6, c);
  auto at = approximate_perfect_sum(s, sum, c);
  CHECK(above.total == 0);
  CHECK(at.total == 1);
  CHECK(at.per_k.back().method_used == "degenerate");
}

TEST_CASE("exact_small_k = k_max reproduces the exact report") {
  std::mt19937_64 g(14);
  for (int t = 0; t < 10; ++t) {
    auto s = oracle::random_set(g, 4 + g() % 12, t % 2 == 0, 0, 20);
    const double target = std::round(std::uniform_real_distribution<double>(0, 10.0 * s.size())(g));
    for (Relation r : {Relation::eq, Relation::ge, Relation::le}) {
      auto c = cfg(r);
      c.exact_small_k = s.size();
      c.detail = CountDetail::always;
      auto a = approximate_perfect_sum(s, target, c);
      auto e = exact_perfect_sum(s, target, r);
      CHECK(a.total == e.total);
      for (std::size_t i = 0; i < a.per_k.size(); ++i) {
        CHECK(*a.per_k[i].count == *e.per_k[i].count);
        CHECK(a.per_k[i].method_used == "exact");
      }
    }
  }
}

TEST_CASE("kde runs are reproducible and independent of workers") {
  std::mt19937_64 g(15);
  auto s = oracle::random_set(g, 25, true, 0, 20);
  auto c = cfg(Relation::ge);
  c.method.kind = MethodKind::kde;
  c.method.samples = 2000;
  c.method.seed = 7;
  set_thread_cap(1);
  auto a = approximate_perfect_sum(s, 120, c);
  set_thread_cap(3);
  auto b = approximate_perfect_sum(s, 120, c);
  set_thread_cap(0);
  CHECK(a.total == b.total);
  for (std::size_t i = 0; i < a.per_k.size(); ++i) CHECK(a.per_k[i].probability == b.per_k[i].probability);
}

TEST_CASE("diagnostics attach Berry-Esseen terms") {
  std::mt19937_64 g(16);
  auto s = oracle::random_set(g, 30, false, 0, 1);
  auto c = cfg(Relation::ge, 0.0);
  c.diagnostics = true;
  auto r = approximate_perfect_sum(s, 7.5, c);
  for (auto& row : r.per_k) {
    REQUIRE(row.diagnostics);
    if (row.k == 30) CHECK(std::isinf(row.diagnostics->bound_over_C));
    else CHECK(row.diagnostics->bound_over_C > 0);
  }
  std::vector<double> same(5, 1.0);
  auto q = approximate_perfect_sum(same, 2, c);
  for (auto& row : q.per_k) CHECK(!row.diagnostics);
}

TEST_CASE("mean relative error shrinks from n = 14 to n = 24", "[statistical]") {
  ErrorExperiment e;
  e.family = {SetFamily::discrete_uniform, 0, 20};
  e.n_values = {14, 24};
  for (std::uint64_t s = 0; s < 20; ++s) e.seeds.push_back(s);
  e.config.relation = Relation::ge;
  auto r = error_experiment(e);
  REQUIRE(r.summary.size() == 2);
  CHECK(std::isfinite(r.summary[0].mean));
  CHECK(r.summary[1].mean < r.summary[0].mean);
}

TEST_CASE("auto granularity") {
  CHECK(auto_granularity(s1234) == 1.0);
  std::vector<double> even{2, 6, 10};
  CHECK(auto_granularity(even) == 4.0);
  std::vector<double> same{3, 3};
  CHECK(auto_granularity(same) == 1.0);
  std::vector<double> real{0.5, 1};
  CHECK(auto_granularity(real) == 0.0);
}
