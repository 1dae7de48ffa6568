#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vecchia/vecchia.hpp"

namespace vecchia::cli {

namespace {

using Json = nlohmann::ordered_json;

struct KernelFlags {
  std::string kernel = "matern";
  double sigma2 = 1.0;
  double beta = 0.078809;
  double nu = 0.5;
  std::optional<double> effective_range;

  void add_to(CLI::App& app) {
    app.add_option("--kernel", kernel, "Covariance family")
        ->check(CLI::IsMember({"matern", "powexp"}))
        ->capture_default_str();
    app.add_option("--sigma2", sigma2, "Variance sigma^2")->capture_default_str();
    app.add_option("--beta", beta, "Range beta")->capture_default_str();
    app.add_option("--nu", nu, "Smoothness nu (exponent alpha for powexp)")->capture_default_str();
    app.add_option("--effective-range", effective_range,
                   "Take beta from the tabulated (effective range, nu) grid; overrides --beta");
  }

  KernelSpec spec() const {
    KernelParams p{sigma2, beta, nu};
    if (effective_range) p.beta = beta_from_effective_range(*effective_range, nu);
    if (!p.valid()) throw DomainError("kernel parameters must be positive");
    return KernelSpec{parse_kernel_family(kernel), p};
  }
};

struct PlanFlags {
  Index m = 60;
  std::string ordering = "random";
  std::uint64_t seed = 0;

  void add_to(CLI::App& app, bool with_m = true) {
    if (with_m) app.add_option("--m", m, "Conditioning set size")->capture_default_str();
    app.add_option("--ordering", ordering, "Location ordering")
        ->check(CLI::IsMember({"random", "morton"}))
        ->capture_default_str();
    app.add_option("--seed", seed, "Seed for random ordering and data generation")->capture_default_str();
  }
};

struct MetricFlags {
  std::string metric = "auto";
  double radius = kEarthRadiusKm;

  void add_to(CLI::App& app) {
    app.add_option("--metric", metric, "Distance metric; auto follows the CSV header")
        ->check(CLI::IsMember({"auto", "euclidean", "gcd"}))
        ->capture_default_str();
    app.add_option("--radius", radius, "Sphere radius for gcd (km)")->capture_default_str();
  }

  std::optional<Metric> resolve() const {
    if (metric == "euclidean") return Metric::euclidean();
    if (metric == "gcd") return Metric::great_circle(radius);
    return std::nullopt;
  }

  Dataset read(const std::string& path) const {
    Dataset ds = io::read_dataset_csv(std::filesystem::path(path), resolve());
    if (metric == "auto" && ds.metric.kind() == Metric::Kind::great_circle)
      ds.metric = Metric::great_circle(radius);
    return ds;
  }
};

// Writes to the --output file when given, otherwise to the default stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error("cannot open " + path + " for writing");
    }
    stream_ = path.empty() ? &fallback : &file_;
  }
  std::ostream& stream() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

std::vector<Location> uniform_locations(Index n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0));
  std::vector<Location> locs(static_cast<std::size_t>(n));
  for (auto& l : locs) {
    l.x = rng.uniform();
    l.y = rng.uniform();
  }
  return locs;
}

std::string json_text(const Json& j) { return j.dump(2) + "\n"; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// ---------------------------------------------------------------------------

struct GenerateCmd {
  Index n = 0;
  PlanFlags plan;
  KernelFlags kernel;
  Index max_dense_n = kDefaultMaxDenseN;
  std::string output;

  void add_to(CLI::App& app) {
    app.add_option("--n", n, "Number of locations")->required()->check(CLI::PositiveNumber);
    app.add_option("--seed", plan.seed, "Seed for locations and field")->capture_default_str();
    kernel.add_to(app);
    app.add_option("--max-dense-n", max_dense_n, "Dense size guard")->capture_default_str();
    app.add_option("--output,-o", output, "Output CSV (default: stdout)");
  }

  int run(std::ostream& out) const {
    const auto locs = uniform_locations(n, plan.seed);
    const auto field =
        simulate_grf(locs, kernel.spec(), Metric::euclidean(), derive_seed(plan.seed, 1), max_dense_n);
    Sink sink(output, out);
    io::write_dataset_csv(sink.stream(), Dataset{locs, field, Metric::euclidean()});
    return kOk;
  }
};

struct LikelihoodCmd {
  std::string input;
  MetricFlags metric;
  KernelFlags kernel;
  PlanFlags plan;
  bool with_exact = false;
  Index max_dense_n = kDefaultMaxDenseN;
  std::string output;

  void add_to(CLI::App& app) {
    app.add_option("--input,-i", input, "Input CSV")->required();
    metric.add_to(app);
    kernel.add_to(app);
    plan.add_to(app);
    app.add_flag("--with-exact", with_exact, "Also evaluate the dense exact log-likelihood");
    app.add_option("--max-dense-n", max_dense_n, "Dense size guard")->capture_default_str();
    app.add_option("--output,-o", output, "Output JSON (default: stdout)");
  }

  int run(std::ostream& out) const {
    const Dataset ds = metric.read(input);
    const KernelSpec spec = kernel.spec();
    const VecchiaPlan p = make_plan(ds, plan.m, parse_ordering(plan.ordering), plan.seed);
    const double vll = vecchia_loglik(p.permutation.apply(ds), p, spec).total;
    Json j;
    j["vecchia_ll"] = vll;
    if (with_exact) {
      if (ds.size() > max_dense_n) throw SizeError("--with-exact needs n <= --max-dense-n");
      const double ell = exact_loglik(ds, spec, max_dense_n);
      j["exact_ll"] = ell;
      j["abs_diff"] = std::abs(vll - ell);
    }
    Sink sink(output, out);
    sink.stream() << json_text(j);
    return kOk;
  }
};

struct KlCmd {
  std::string input;
  Index n = 0;
  MetricFlags metric;
  KernelFlags kernel;
  PlanFlags plan;
  std::vector<Index> m_list{10, 30, 60};
  std::vector<std::string> orderings{"random"};
  Index max_dense_n = kDefaultMaxDenseN;
  std::string output;

  void add_to(CLI::App& app) {
    auto* in = app.add_option("--input,-i", input, "Input CSV (only locations are used)");
    app.add_option("--n", n, "Generate n uniform locations instead of reading a file")->excludes(in);
    metric.add_to(app);
    kernel.add_to(app);
    plan.add_to(app, false);
    app.add_option("--m-list", m_list, "Conditioning sizes")->delimiter(',')->capture_default_str();
    app.add_option("--orderings", orderings, "Orderings to sweep")
        ->delimiter(',')
        ->check(CLI::IsMember({"random", "morton"}))
        ->capture_default_str();
    app.add_option("--max-dense-n", max_dense_n, "Dense size guard")->capture_default_str();
    app.add_option("--output,-o", output, "Output CSV (default: stdout)");
  }

  int run(std::ostream& out) const {
    std::vector<Location> locs;
    Metric m = Metric::euclidean();
    if (!input.empty()) {
      const Dataset ds = metric.read(input);
      locs = ds.locations;
      m = ds.metric;
    } else {
      if (n < 2) throw SizeError("kl needs --input or --n >= 2");
      locs = uniform_locations(n, plan.seed);
      if (auto r = metric.resolve()) m = *r;
    }
    std::vector<Ordering> ords;
    for (const auto& o : orderings) ords.push_back(parse_ordering(o));
    const auto rows = kl_sweep(locs, m, ords, m_list, kernel.spec(), plan.seed, max_dense_n);
    Sink sink(output, out);
    auto& s = sink.stream();
    s << "ordering,m,kl,exact_ll0,vecchia_ll0\n";
    for (const auto& r : rows)
      s << to_string(r.ordering) << ',' << r.m << ',' << io::format_double(r.kl) << ','
        << io::format_double(r.exact_ll0) << ',' << io::format_double(r.vecchia_ll0) << '\n';
    return kOk;
  }
};

struct EstimateCmd {
  std::string input;
  MetricFlags metric;
  KernelFlags kernel;
  PlanFlags plan;
  std::string objective = "vecchia";
  bool free_nu = false;
  bool sqrt_first = false;
  bool detrend = false;
  double tol = 1e-5;
  int max_evals = 500;
  std::vector<double> lower{1e-3, 1e-4, 0.05};
  std::vector<double> upper{1e2, 1e1, 5.0};
  Index max_dense_n = kDefaultMaxDenseN;
  std::string output;

  void add_to(CLI::App& app) {
    app.add_option("--input,-i", input, "Input CSV")->required();
    metric.add_to(app);
    kernel.add_to(app);
    plan.add_to(app);
    app.add_option("--objective", objective, "Likelihood to maximize")
        ->check(CLI::IsMember({"vecchia", "exact"}))
        ->capture_default_str();
    app.add_flag("--free-nu", free_nu, "Estimate nu as well (default: fixed at --nu)");
    app.add_flag("--sqrt", sqrt_first, "Square-root transform the observations first");
    app.add_flag("--detrend", detrend, "Remove a linear trend in the coordinates first");
    app.add_option("--tol", tol, "Relative objective tolerance")->capture_default_str();
    app.add_option("--max-evals", max_evals, "Objective evaluation budget")->capture_default_str();
    app.add_option("--lower", lower, "Lower bounds sigma2,beta,nu")->delimiter(',')->expected(3)->capture_default_str();
    app.add_option("--upper", upper, "Upper bounds sigma2,beta,nu")->delimiter(',')->expected(3)->capture_default_str();
    app.add_option("--max-dense-n", max_dense_n, "Dense size guard")->capture_default_str();
    app.add_option("--output,-o", output, "Output JSON (default: stdout)");
  }

  int run(std::ostream& out) const {
    Dataset ds = metric.read(input);
    if (sqrt_first) ds = sqrt_transform(ds);
    if (detrend) ds = ols_detrend(ds);
    const KernelSpec init = kernel.spec();

    FitConfig cfg;
    cfg.objective = objective == "exact" ? Objective::exact : Objective::vecchia;
    cfg.m = plan.m;
    cfg.ordering = parse_ordering(plan.ordering);
    cfg.seed = plan.seed;
    for (std::size_t i = 0; i < 3; ++i) cfg.bounds[i] = Bounds{lower.at(i), upper.at(i)};
    cfg.init = init.params;
    cfg.free_nu = free_nu;
    cfg.tol = tol;
    cfg.max_evals = max_evals;
    cfg.max_dense_n = max_dense_n;

    const FitResult r = mle_estimate(ds, cfg, init.family);
    Json j;
    j["theta_hat"] = {{"sigma2", r.theta_hat.sigma_sq}, {"beta", r.theta_hat.beta}, {"nu", r.theta_hat.nu}};
    j["loglik"] = r.loglik;
    j["evaluations"] = r.evaluations;
    j["converged"] = r.converged;
    Sink sink(output, out);
    sink.stream() << json_text(j);
    return kOk;
  }
};

struct PredictCmd {
  std::string train;
  std::string test;
  MetricFlags metric;
  KernelFlags kernel;
  Index m = 60;
  std::string output;
  std::string summary;

  void add_to(CLI::App& app) {
    app.add_option("--train", train, "Training CSV")->required();
    app.add_option("--test", test, "Test CSV; its value column is the held-out truth")->required();
    metric.add_to(app);
    kernel.add_to(app);
    app.add_option("--m", m, "Neighbors per prediction (0 = whole training set)")->capture_default_str();
    app.add_option("--output,-o", output, "Prediction CSV x,y,prediction")->required();
    app.add_option("--summary", summary, "Summary JSON (default: stdout)");
  }

  int run(std::ostream& out) const {
    const Dataset tr = metric.read(train);
    Dataset te = metric.read(test);
    te.metric = tr.metric;
    const Index mm = m == 0 ? tr.size() : std::min(m, tr.size());
    const auto report = krige_predict(tr, kernel.spec(), te, mm);
    {
      Sink sink(output, out);
      auto& s = sink.stream();
      s << "x,y,prediction\n";
      for (Index q = 0; q < te.size(); ++q)
        s << io::format_double(te.locations[static_cast<std::size_t>(q)].x) << ','
          << io::format_double(te.locations[static_cast<std::size_t>(q)].y) << ','
          << io::format_double(report.predictions[q]) << '\n';
    }
    Json j;
    j["mse"] = *report.mse;
    j["n_train"] = tr.size();
    j["n_test"] = te.size();
    j["m"] = mm;
    Sink sink(summary, out);
    sink.stream() << json_text(j);
    return kOk;
  }
};

struct BenchCmd {
  Index n = 100000;
  PlanFlags plan;
  KernelFlags kernel;
  int reps = 3;
  std::string output;

  void add_to(CLI::App& app) {
    app.add_option("--n", n, "Number of locations")->capture_default_str();
    plan.add_to(app);
    kernel.add_to(app);
    app.add_option("--reps", reps, "Timed repetitions")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--output,-o", output, "Output JSON (default: stdout)");
  }

  int run(std::ostream& out) const {
    using Clock = std::chrono::steady_clock;
    auto seconds = [](Clock::time_point a, Clock::time_point b) {
      return std::chrono::duration<double>(b - a).count();
    };

    Dataset ds{uniform_locations(n, plan.seed), Eigen::VectorXd(n), Metric::euclidean()};
    Rng rng(derive_seed(plan.seed, 2));
    for (Index i = 0; i < n; ++i) ds.observations[i] = rng.normal();
    const KernelSpec spec = kernel.spec();
    const VecchiaPlan p = make_plan(ds, plan.m, parse_ordering(plan.ordering), plan.seed);
    const Dataset ordered = p.permutation.apply(ds);

    // Untimed warm-up allocates and touches the workspace once.
    BatchWorkspace<double> ws;
    assemble_into(ws, ordered, p, spec);
    reduce(ws, factor_and_solve(ws), ordered.observations);

    std::vector<double> t_assembly, t_numeric, t_reduce, t_total;
    double loglik = 0.0;
    for (int r = 0; r < reps; ++r) {
      const auto t0 = Clock::now();
      assemble_into(ws, ordered, p, spec);
      const auto t1 = Clock::now();
      const auto corr = factor_and_solve(ws);
      const auto t2 = Clock::now();
      loglik = reduce(ws, corr, ordered.observations).total;
      const auto t3 = Clock::now();
      t_assembly.push_back(seconds(t0, t1));
      t_numeric.push_back(seconds(t1, t2));
      t_reduce.push_back(seconds(t2, t3));
      t_total.push_back(seconds(t0, t3));
    }

    const double model_flops = flop_count(n, plan.m);
    const double total = median(t_total);
    Json j;
    j["n"] = n;
    j["m"] = plan.m;
    j["reps"] = reps;
    j["loglik"] = loglik;
    j["model_flops"] = model_flops;
    j["leading_flops"] = leading_flop_count(n, plan.m);
    j["wall_time_seconds"] = {{"assembly", median(t_assembly)},
                              {"factorization", median(t_numeric)},
                              {"reduction", median(t_reduce)},
                              {"total", total}};
    j["achieved_gflops"] = model_flops / total / 1e9;
    Sink sink(output, out);
    sink.stream() << json_text(j);
    return kOk;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vecchia-approximated Gaussian-process likelihoods, KL sweeps, estimation and kriging"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (results do not depend on this)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  GenerateCmd generate;
  LikelihoodCmd likelihood;
  KlCmd kl;
  EstimateCmd estimate;
  PredictCmd predict;
  BenchCmd bench;
  generate.add_to(*app.add_subcommand("generate", "Simulate a Gaussian random field on the unit square"));
  likelihood.add_to(*app.add_subcommand("likelihood", "Evaluate the Vecchia (and optionally exact) log-likelihood"));
  kl.add_to(*app.add_subcommand("kl", "KL divergence sweep over conditioning sizes and orderings"));
  estimate.add_to(*app.add_subcommand("estimate", "Maximum-likelihood covariance parameters"));
  predict.add_to(*app.add_subcommand("predict", "Kriging predictions and MSE on held-out data"));
  bench.add_to(*app.add_subcommand("bench", "Time the batched likelihood and report Gflop/s"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageOrParseError;
  }

  try {
    set_max_threads(threads);
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "generate") return generate.run(out);
    if (name == "likelihood") return likelihood.run(out);
    if (name == "kl") return kl.run(out);
    if (name == "estimate") return estimate.run(out);
    if (name == "predict") return predict.run(out);
    if (name == "bench") return bench.run(out);
    return kFailure;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kUsageOrParseError;
  } catch (const InfeasibleError& e) {
    err << "infeasible parameters: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("vecchia");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace vecchia::cli
