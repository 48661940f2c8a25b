// perfsum command line: exact / approx / evaluate / simulate / generate.
// stdout carries only the report; diagnostics go to stderr.

#include <chrono>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <perfsum/perfsum.hpp>

namespace {

enum Exit { kOk = 0, kInput = 1, kInfeasible = 2, kInternal = 3 };

perfsum::InputDocument read_input(const std::string& path) {
  if (path == "-") {
    std::string text((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
    return perfsum::parse_input(text);
  }
  return perfsum::load_input(path);
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw perfsum::InputError("cannot write '" + path + "'");
  out << body;
}

struct Timer {
  bool on = false;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  void log(const std::string& what) const {
    if (!on) return;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "perfsum: " << what << " (" << s << " s)\n";
  }
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate and exact perfect-sum counting"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 0;
  bool verbose = false;
  app.add_option("--threads", threads, "worker cap (default: PERFSUM_THREADS or all cores)");
  app.add_flag("-v,--verbose", verbose, "timings on stderr");

  std::string input;
  double target = 0.0;
  std::string relation = "ge";
  double tolerance = 0.0;

  // exact
  auto* exact = app.add_subcommand("exact", "count subsets exactly (enumeration or dp)");
  std::string engine = "auto";
  std::size_t cap = perfsum::ExactLimits{}.max_enumeration_n;
  exact->add_option("input", input, "values file (text, single-column csv, json) or - for stdin")->required();
  exact->add_option("--target,-t", target, "target T")->required();
  exact->add_option("--relation,-r", relation, "eq, ge or le")->capture_default_str();
  exact->add_option("--tolerance", tolerance, "|sum - T| <= tolerance for eq")->capture_default_str();
  exact->add_option("--engine", engine, "enumerate, dp or auto")->capture_default_str();
  exact->add_option("--max-n", cap, "enumeration cap")->capture_default_str();

  // approx
  auto* approx = app.add_subcommand("approx", "approximate count by per-k distribution");
  std::string method = "normal";
  std::string granularity = "auto";
  std::uint64_t seed = 0;
  std::size_t samples = perfsum::kDefaultKdeSamples;
  std::size_t exact_small_k = 0;
  std::size_t k_min = 1;
  std::size_t k_max = 0;
  bool diagnostics = false;
  std::optional<double> low;
  std::optional<double> high;
  std::optional<double> df;
  std::string per_k = "auto";
  approx->add_option("input", input, "values file or - for stdin")->required();
  approx->add_option("--target,-t", target, "target T")->required();
  approx->add_option("--relation,-r", relation, "eq, ge or le")->capture_default_str();
  approx->add_option("--method,-m", method, "normal, irwin_hall, chi_square or kde")->capture_default_str();
  approx->add_option("--granularity,-g", granularity, "auto or a value spacing (0 disables)")->capture_default_str();
  approx->add_option("--seed", seed, "kde seed")->capture_default_str();
  approx->add_option("--samples", samples, "kde samples per k")->capture_default_str();
  approx->add_option("--exact-small-k", exact_small_k, "count k <= this exactly when C(n,k) <= 1e6");
  approx->add_option("--k-min", k_min, "first k")->capture_default_str();
  approx->add_option("--k-max", k_max, "last k (0 = n)")->capture_default_str();
  approx->add_option("--tolerance", tolerance, "eq tolerance for exact strata")->capture_default_str();
  approx->add_flag("--diagnostics", diagnostics, "attach Berry-Esseen terms per k");
  approx->add_option("--low", low, "irwin_hall lower bound (default: set minimum)");
  approx->add_option("--high", high, "irwin_hall upper bound (default: set maximum)");
  approx->add_option("--df", df, "chi_square degrees of freedom per element (default: set mean)");
  approx->add_option("--per-k", per_k, "auto, all or none")->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "JSD of each method against the exact pmf, per k");
  std::vector<std::size_t> ks;
  std::vector<std::string> methods{"normal"};
  double eval_g = 1.0;
  std::string format = "csv";
  evaluate->add_option("input", input, "values file or - for stdin")->required();
  evaluate->add_option("--k", ks, "subset sizes")->required()->delimiter(',');
  evaluate->add_option("--methods", methods, "methods")->delimiter(',')->capture_default_str();
  evaluate->add_option("--samples", samples, "kde samples per k")->capture_default_str();
  evaluate->add_option("--seed", seed, "kde seed")->capture_default_str();
  evaluate->add_option("--granularity,-g", eval_g, "bin width")->capture_default_str();
  evaluate->add_option("--format", format, "csv or json")->capture_default_str();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run an experiment config");
  std::string config_path;
  std::string out_prefix;
  simulate->add_option("--config,-c", config_path, "experiment config (JSON)")->required();
  simulate->add_option("--out,-o", out_prefix, "write <prefix>.csv, <prefix>.summary.csv, <prefix>.json");
  simulate->add_option("--format", format, "stdout format when --out is absent: csv or json")->capture_default_str();

  // generate
  auto* generate = app.add_subcommand("generate", "print a random set, one value per line");
  perfsum::SetSpec spec;
  std::string family = "discrete_uniform";
  generate->add_option("--family", family, "discrete_uniform, uniform or chi_square")->capture_default_str();
  generate->add_option("--n", spec.n, "set size")->required();
  generate->add_option("--seed", spec.seed, "seed")->capture_default_str();
  generate->add_option("--low", spec.low, "lower bound")->capture_default_str();
  generate->add_option("--high", spec.high, "upper bound")->capture_default_str();
  generate->add_option("--df", spec.df, "chi-square degrees of freedom")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (threads > 0) perfsum::set_thread_cap(threads);
    Timer timer{verbose};
    std::ios::sync_with_stdio(false);

    if (*exact) {
      const auto doc = read_input(input);
      timer.log("read " + std::to_string(doc.values.size()) + " values");
      perfsum::ExactLimits limits;
      limits.max_enumeration_n = cap;
      const auto report = perfsum::exact_perfect_sum(doc.values, target, perfsum::parse_relation(relation), tolerance,
                                                     perfsum::parse_engine(engine), limits);
      std::cout << perfsum::to_json(report).dump(2) << '\n';
      timer.log("exact done");
    } else if (*approx) {
      const auto doc = read_input(input);
      timer.log("read " + std::to_string(doc.values.size()) + " values");
      perfsum::ApproxConfig config;
      config.method.kind = perfsum::parse_method(method);
      config.method.low = low;
      config.method.high = high;
      config.method.df = df;
      config.method.samples = samples;
      config.method.seed = seed;
      config.relation = perfsum::parse_relation(relation);
      if (granularity != "auto") {
        try {
          config.granularity = std::stod(granularity);
        } catch (const std::exception&) {
          throw perfsum::InputError("--granularity must be 'auto' or a number");
        }
      }
      config.k_min = k_min;
      config.k_max = k_max;
      config.exact_small_k = exact_small_k;
      config.tolerance = tolerance;
      config.diagnostics = diagnostics;
      bool rows = false;
      if (per_k == "all") {
        config.detail = perfsum::CountDetail::always;
        rows = true;
      } else if (per_k == "none") {
        config.detail = perfsum::CountDetail::never;
      } else if (per_k == "auto") {
        rows = doc.values.size() <= perfsum::kAutoDetailMaxN;
      } else {
        throw perfsum::InputError("--per-k must be auto, all or none");
      }
      const auto report = perfsum::approximate_perfect_sum(doc.values, target, config);
      timer.log("approx done");
      std::cout << perfsum::to_json(report, rows).dump(2) << '\n';
      timer.log("written");
    } else if (*evaluate) {
      const auto doc = read_input(input);
      perfsum::DivergenceExperiment e;
      e.values = doc.values;
      e.k_values = ks;
      for (const std::string& m : methods) {
        perfsum::MethodSpec ms;
        ms.kind = perfsum::parse_method(m);
        ms.samples = samples;
        ms.seed = seed;
        e.methods.push_back(ms);
      }
      e.granularity = eval_g;
      e.seed = seed;
      const auto result = perfsum::divergence_experiment(e);
      if (format == "json") std::cout << perfsum::to_json(result).dump(2) << '\n';
      else if (format == "csv") std::cout << perfsum::rows_csv(result);
      else throw perfsum::InputError("--format must be csv or json");
      timer.log("evaluate done");
    } else if (*simulate) {
      const auto config = perfsum::parse_simulation_config(perfsum::read_file(config_path));
      const auto result = perfsum::run_simulation(config);
      timer.log("simulation done");
      if (!out_prefix.empty()) {
        write_file(out_prefix + ".csv", perfsum::rows_csv(result));
        write_file(out_prefix + ".summary.csv", perfsum::summary_csv(result));
        write_file(out_prefix + ".json", perfsum::to_json(result).dump(2) + "\n");
      } else if (format == "json") {
        std::cout << perfsum::to_json(result).dump(2) << '\n';
      } else if (format == "csv") {
        std::cout << perfsum::rows_csv(result);
      } else {
        throw perfsum::InputError("--format must be csv or json");
      }
    } else if (*generate) {
      spec.family = perfsum::parse_family(family);
      if (spec.family == perfsum::SetFamily::custom_file) throw perfsum::InputError("generate needs a random family");
      for (const double v : perfsum::generate_set(spec)) std::cout << perfsum::detail::format_double(v) << '\n';
    }
    std::cout.flush();
    return kOk;
  } catch (const perfsum::InfeasibleError& e) {
    std::cerr << "perfsum: infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const perfsum::InputError& e) {
    std::cerr << "perfsum: input error: " << e.what() << '\n';
    return kInput;
  } catch (const perfsum::DomainError& e) {
    std::cerr << "perfsum: invalid argument: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "perfsum: internal error: " << e.what() << '\n';
    return kInternal;
  }
}
