// Acceptance gate: one PASS/FAIL line per criterion, exit 1 on any FAIL.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <perfsum/perfsum.hpp>

#include "oracles.hpp"

using namespace perfsum;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& what) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Run {
  int rc = -1;
  std::string out;
};

Run run(const std::string& cmd) {
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 65536> buf;
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- 1 ----
void moments() {
  const auto t0 = Clock::now();
  std::mt19937_64 g(1001);
  double worst = 0;
  bool ok = true;
  for (int set = 0; set < 200; ++set) {
    const std::size_t n = 2 + g() % 11;
    auto s = oracle::random_set(g, n, set % 2 == 0, -50, 50);
    const auto st = set_statistics(s);
    const long double scale = oracle::pop_var_of({s.begin(), s.end()}) + 1;
    for (std::size_t k = 1; k <= n; ++k) {
      const auto sums = oracle::subset_sums(s, k);
      const long double m = oracle::mean_of(sums);
      const long double v = oracle::pop_var_of(sums);
      const double em = std::fabs(subset_sum_mean(st, k) - static_cast<double>(m)) /
                        std::max<long double>(std::fabs(m), 1e-300L);
      // exact zeros (k = n, constant sets) are compared on the set's own scale
      const double ev = v == 0 ? std::fabs(subset_sum_variance(st, k)) / static_cast<double>(scale * k)
                               : std::fabs(subset_sum_variance(st, k) - static_cast<double>(v)) / static_cast<double>(v);
      worst = std::max({worst, m == 0 ? 0.0 : em, ev});
      if ((m != 0 && em > 1e-12) || ev > 1e-12) ok = false;
    }
  }
  const double secs = seconds_since(t0);
  report(1, ok && secs < 10, fmt("moment exactness, 200 sets, max rel err %.2e (<= 1e-12), %.2f s (< 10 s)", worst, secs));
}

// ---- 2 ----
void oracle_agreement() {
  const auto t0 = Clock::now();
  std::mt19937_64 g(2002);
  int agree = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 1 + g() % 20;
    std::vector<double> s(n);
    std::vector<std::int64_t> ints(n);
    for (std::size_t i = 0; i < n; ++i) ints[i] = static_cast<std::int64_t>(g() % 51), s[i] = static_cast<double>(ints[i]);
    const auto target = static_cast<std::int64_t>(g() % (50 * n + 2));
    bool all = true;
    for (Relation r : {Relation::eq, Relation::ge, Relation::le}) {
      const auto a = dp_counts(ints, target, r);
      const auto b = enumerate_counts(s, static_cast<double>(target), r);
      all = all && a.counts == b.counts && a.total == b.total;
    }
    agree += all;
  }
  const double secs = seconds_since(t0);
  report(2, agree == 100 && secs < 30, fmt("dp == enumerate on %d/100 instances x 3 relations, %.2f s (< 30 s)", agree, secs));
}

// ---- 3 ----
void binomials() {
  bool pascal = true;
  const auto tri = oracle::pascal(60);
  for (std::uint64_t n = 0; n <= 60; ++n)
    for (std::uint64_t k = 0; k <= n; ++k) {
      pascal = pascal && binomial(n, k) == tri[n][k];
      if (n >= 1 && k >= 1 && k <= n - 1) pascal = pascal && binomial(n, k) == binomial(n - 1, k - 1) + binomial(n - 1, k);
    }
  const BigInt c = binomial(100, 5);
  report(3, c == 75287520 && pascal,
         fmt("C(100,5) = %s (want 75287520); Pascal's rule for n <= 60: %s", to_decimal(c).c_str(), pascal ? "holds" : "broken"));
}

// ---- 4 ----
void accuracy_trend() {
  const auto t0 = Clock::now();
  ErrorExperiment e;
  e.family = {SetFamily::discrete_uniform, 0, 20};
  e.n_values = {14, 18, 22, 26};
  for (std::uint64_t s = 0; s < 20; ++s) e.seeds.push_back(s);
  e.config.relation = Relation::ge;
  const auto r = error_experiment(e);
  std::string means;
  bool finite = r.summary.size() == 4;
  for (const auto& s : r.summary) {
    means += fmt(" n=%zu:%.4f", s.axis_value, s.mean);
    finite = finite && std::isfinite(s.mean) && s.count == 20;
  }
  const double secs = seconds_since(t0);
  const bool ok = finite && r.summary.back().mean < r.summary.front().mean && secs < 300;
  report(4, ok, fmt("normal-method mean relative error%s; n=26 < n=14; %.1f s (< 300 s)", means.c_str(), secs));
}

// ---- 5 ----
double jsd_of(const DivergenceExperiment& d, std::string_view method, std::size_t k) {
  const auto r = divergence_experiment(d);
  for (const auto& row : r.rows)
    if (row.method == method && row.axis_value == k) return row.value;
  return NAN;
}

void jsd_orderings() {
  const auto t0 = Clock::now();
  int a_wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    DivergenceExperiment d;
    d.values = generate_set({SetFamily::discrete_uniform, 0, 20, 3, "", 20, seed});
    d.k_values = {1, 4};
    d.methods = {MethodSpec{}};
    const auto r = divergence_experiment(d);
    a_wins += r.rows[1].value < r.rows[0].value;
  }

  MethodSpec chi;
  chi.kind = MethodKind::chi_square;
  chi.df = 3.0;
  std::array<int, 2> b_wins{};
  const std::array<std::size_t, 2> sizes{200, 5000};
  for (int i = 0; i < 2; ++i)
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      DivergenceExperiment d;
      d.values = generate_set({SetFamily::chi_square, 0, 0, 3, "", sizes[i], seed});
      d.k_values = {3};
      d.methods = {MethodSpec{}, chi};
      const auto r = divergence_experiment(d);
      double c = NAN, nm = NAN;
      for (const auto& row : r.rows) (row.method == "chi_square" ? c : nm) = row.value;
      b_wins[i] += c < nm;
    }

  MethodSpec kde;
  kde.kind = MethodKind::kde;
  kde.samples = 5000;
  int c_wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto lo = generate_set({SetFamily::discrete_uniform, 0, 5, 3, "", 10, 2 * seed});
    auto hi = generate_set({SetFamily::discrete_uniform, 995, 1000, 3, "", 10, 2 * seed + 1});
    DivergenceExperiment d;
    d.values = lo;
    d.values.insert(d.values.end(), hi.begin(), hi.end());
    d.k_values = {2};
    d.methods = {MethodSpec{}, kde};
    d.seed = seed;
    c_wins += jsd_of(d, "kde", 2) < jsd_of(d, "normal", 2);
  }
  const bool a = a_wins >= 16;
  const bool b = b_wins[1] > 5 && b_wins[0] < 10;
  const bool c = c_wins >= 9;
  report(5, a && b && c,
         fmt("(a) normal k=4 < k=1 on %d/20 (>= 16); (b) chi_square beats normal on %d/10 at n=5000 (> 5) and %d/10 "
             "at n=200 (< 10); (c) kde < normal on gapped sets %d/10 (>= 9); %.1f s",
             a_wins, b_wins[1], b_wins[0], c_wins, seconds_since(t0)));
}

// ---- 6 ----
DiscretePmf random_pmf(std::mt19937_64& g) {
  DiscretePmf p;
  const std::size_t size = 1 + g() % 25;
  const int lo = static_cast<int>(g() % 10);
  double tot = 0;
  for (std::size_t i = 0; i < size; ++i) {
    p.support.push_back(lo + static_cast<double>(i));
    p.mass.push_back(g() % 3 == 0 ? 0.0 : std::uniform_real_distribution<double>(0, 1)(g));
    tot += p.mass.back();
  }
  if (tot == 0) p.mass[0] = tot = 1;
  for (double& m : p.mass) m /= tot;
  return p;
}

void properties() {
  const auto t0 = Clock::now();
  std::mt19937_64 g(6006);
  std::string broken;
  auto need = [&](bool cond, const char* name) {
    if (!cond && broken.find(name) == std::string::npos) broken += std::string(broken.empty() ? "" : ", ") + name;
  };

  for (int t = 0; t < 1000; ++t) {
    const auto p = random_pmf(g);
    const auto q = random_pmf(g);
    const double pq = js_divergence(p, q);
    need(std::fabs(pq - js_divergence(q, p)) <= 1e-12, "jsd symmetry");
    need(pq >= 0 && pq <= std::log(2.0), "jsd bounds");
    need(js_divergence(p, p) == 0.0, "jsd zero on equal");
    std::map<double, std::pair<double, double>> u;
    for (std::size_t i = 0; i < p.support.size(); ++i) u[p.support[i]].first = p.mass[i];
    for (std::size_t i = 0; i < q.support.size(); ++i) u[q.support[i]].second = q.mass[i];
    bool equal = true;
    for (const auto& [x, m] : u) equal = equal && std::fabs(m.first - m.second) <= 1e-9;
    need(equal || pq > 0.0, "jsd zero iff equal");
  }

  for (int t = 0; t < 40; ++t) {
    auto s = oracle::random_set(g, 5 + g() % 40, t % 2 == 0, 0, 20);
    const auto st = set_statistics(s);
    const std::size_t k = 1 + g() % s.size();
    std::vector<SumDistribution> laws{normal_sum_approx(st, k), irwin_hall_sum(std::min<std::size_t>(k, 60), 0, 20),
                                      chi_square_sum(k, 1 + st.mean)};
    const KdeModel model = fit_kde(s, k, 2000, t);
    for (int q = 0; q < 50; ++q) {
      const double target = std::uniform_real_distribution<double>(-5, 25.0 * k)(g);
      const double gran = 0.25 * (1 + g() % 8);
      for (const auto& d : laws) {
        const double sum = probability_query(d, target, Relation::ge, gran) +
                           probability_query(d, target, Relation::le, gran) -
                           probability_query(d, target, Relation::eq, gran);
        need(std::fabs(sum - 1) <= 1e-9, "complement identity");
      }
      const double ks = probability_query(model, target, Relation::ge, gran) +
                        probability_query(model, target, Relation::le, gran) -
                        probability_query(model, target, Relation::eq, gran);
      need(std::fabs(ks - 1) <= 1e-9, "complement identity (kde)");
    }
    for (const auto& d : laws) {
      double prev = 0;
      for (int i = -200; i <= 3000; ++i) {
        const double c = d.cdf(i * 0.1 * static_cast<double>(k));
        need(c >= prev && c <= 1, "cdf monotonicity");
        prev = c;
      }
    }
    // tophat density integrates to 1: exact integral over its breakpoints
    const auto& xs = model.sums();
    const double h = model.bandwidth();
    std::vector<double> cuts;
    for (double x : xs) cuts.push_back(x - h), cuts.push_back(x + h);
    std::sort(cuts.begin(), cuts.end());
    long double integral = 0;
    for (std::size_t i = 1; i < cuts.size(); ++i)
      if (cuts[i] > cuts[i - 1]) integral += model.density(0.5 * (cuts[i] + cuts[i - 1])) * (long double)(cuts[i] - cuts[i - 1]);
    // x +- h is itself rounded, so allow a few ulps of the sums relative to h
    const double slack = 8 * std::numeric_limits<double>::epsilon() * std::max(std::fabs(xs.front()), std::fabs(xs.back())) / h;
    need(std::fabs(static_cast<double>(integral) - 1) <= 1e-9 + slack, "kde density integral");
    need(kde_cdf(model, cuts.back()) == 1.0 && kde_cdf(model, cuts.front()) == 0.0, "kde normalization");

    ApproxConfig c;
    c.relation = static_cast<Relation>(g() % 3);
    c.granularity = t % 2 == 0 ? std::optional<double>{} : std::optional<double>{0.5};
    c.detail = CountDetail::always;
    const auto r = approximate_perfect_sum(s, std::uniform_real_distribution<double>(0, 10.0 * s.size())(g), c);
    BigInt sum = 0;
    for (const auto& row : r.per_k) {
      need(*row.count >= 0 && *row.count <= binomial(s.size(), row.k), "per-k count bound");
      sum += *row.count;
    }
    need(sum == r.total, "total = sum of rows");
    need(r.total <= (BigInt(1) << s.size()) - 1, "total <= 2^n - 1");

    const auto full = normal_sum_approx(st, s.size());
    double total = 0;
    for (double v : s) total += v;
    need(full.is_degenerate() && subset_sum_variance(st, s.size()) == 0.0, "k = n degenerate");
    need(probability_query(full, total, Relation::eq, 1.0) == 1.0, "k = n atom");
  }
  report(6, broken.empty(),
         broken.empty() ? fmt("property suites (jsd, complement, cdf monotone, kde normalization, count bounds, k = n atom); %.1f s",
                              seconds_since(t0))
                        : "broken: " + broken);
}

// ---- 7, 8 ----
std::string cli() {
#ifdef PERFSUM_CLI_PATH
  return PERFSUM_CLI_PATH;
#else
  return "perfsum";
#endif
}

void performance(const fs::path& dir) {
  const std::array<std::size_t, 3> sizes{250'000, 500'000, 1'000'000};
  std::array<double, 3> median{};
  bool ran = true;
  for (int i = 0; i < 3; ++i) {
    const fs::path in = dir / ("perf_" + std::to_string(sizes[i]) + ".txt");
    ran = ran && run(cli() + " generate --family discrete_uniform --low 0 --high 20 --seed 7 --n " +
                     std::to_string(sizes[i]) + " > " + in.string()).rc == 0;
    std::array<double, 3> t{};
    for (double& v : t) {
      const auto t0 = Clock::now();
      const Run r = run(cli() + " approx " + in.string() + " --method normal --relation ge --target " +
                        std::to_string(5 * sizes[i]) + " > /dev/null");
      v = seconds_since(t0);
      ran = ran && r.rc == 0;
    }
    std::sort(t.begin(), t.end());
    median[i] = t[1];
  }
  const double r1 = median[1] / median[0];
  const double r2 = median[2] / median[1];
  report(7, ran && median[2] < 5 && r1 <= 2.5 && r2 <= 2.5,
         fmt("cli approx normal ge, median of 3: n=2.5e5 %.3f s, 5e5 %.3f s, 1e6 %.3f s (< 5 s); doubling ratios %.2f, %.2f "
             "(<= 2.5)",
             median[0], median[1], median[2], r1, r2));
}

void determinism(const fs::path& dir) {
  const fs::path set = dir / "det.txt";
  {
    std::ofstream f(set);
    for (double v : generate_set({SetFamily::uniform, 0, 20, 3, "", 30, 5})) f << detail::format_double(v) << "\n";
  }
  const fs::path cfg = dir / "det.json";
  {
    std::ofstream f(cfg);
    f << R"({"experiment": "divergence", "set": {"family": "chi_square", "df": 3, "n": 60, "seed": 2},
             "k_values": [1, 2, 3], "methods": ["normal", {"name": "kde", "samples": 4000}], "seed": 11})";
  }
  const std::string approx = " approx " + set.string() + " --target 150 --relation ge --method kde --seed 7 --samples 3000";
  const std::string eval = " evaluate " + set.string() + " --k 1,2,3 --methods kde,normal --samples 2000 --seed 3";
  std::vector<std::string> outs;
  for (int i = 0; i < 2; ++i) {
    const std::string threads = i == 0 ? "" : " --threads 1";
    outs.push_back(run(cli() + threads + approx).out);
    outs.push_back(run(cli() + threads + eval).out);
    const fs::path prefix = dir / ("sim" + std::to_string(i));
    run(cli() + threads + " simulate --config " + cfg.string() + " --out " + prefix.string());
    for (const char* ext : {".csv", ".summary.csv", ".json"}) outs.push_back(slurp(prefix.string() + ext));
  }
  bool same = true;
  const std::size_t half = outs.size() / 2;
  for (std::size_t i = 0; i < half; ++i) same = same && !outs[i].empty() && outs[i] == outs[i + half];
  report(8, same, fmt("kde approx, evaluate and simulate reruns (default vs --threads 1) byte-identical: %s",
                      same ? "yes" : "no"));
}

} // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / ("perfsum_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::vector<std::function<void()>> steps{
      moments, oracle_agreement, binomials, accuracy_trend, jsd_orderings, properties,
      [&] { performance(dir); }, [&] { determinism(dir); }};
  int id = 1;
  for (const auto& step : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
    ++id;
  }
  fs::remove_all(dir);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
