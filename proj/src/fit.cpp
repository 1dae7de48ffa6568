#include "vecchia/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/QR>

#include "vecchia/batch.hpp"
#include "vecchia/likelihood.hpp"
#include "vecchia/parallel.hpp"

namespace vecchia {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Nelder-Mead works on the minimization of cost = -f.
class SimplexSearch {
 public:
  SimplexSearch(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& lower,
                const Eigen::VectorXd& upper, const SimplexOptions& options)
      : f_(f), lower_(lower), upper_(upper), options_(options) {}

  struct Vertex {
    Eigen::VectorXd x;
    double cost = kInf;
  };

  bool budget_left() const { return evaluations_ < options_.max_evals; }
  int evaluations() const { return evaluations_; }
  const Vertex& best() const { return best_; }

  Vertex evaluate(Eigen::VectorXd x) {
    x = x.cwiseMax(lower_).cwiseMin(upper_);
    ++evaluations_;
    const double value = f_(x);
    Vertex v{std::move(x), std::isnan(value) ? kInf : -value};
    if (v.cost < best_.cost || best_.x.size() == 0) best_ = v;
    return v;
  }

  // One Nelder-Mead run from `center`. Returns true on convergence, false
  // when the evaluation budget ran out first.
  bool run(const Eigen::VectorXd& center) {
    const Index d = center.size();
    std::vector<Vertex> simplex;
    simplex.reserve(static_cast<std::size_t>(d + 1));
    simplex.push_back(evaluate(center));
    for (Index i = 0; i < d && budget_left(); ++i) {
      Eigen::VectorXd x = simplex[0].x;
      const double step = options_.initial_step * (upper_[i] - lower_[i]);
      x[i] = x[i] + step <= upper_[i] ? x[i] + step : x[i] - step;
      simplex.push_back(evaluate(x));
    }
    if (std::all_of(simplex.begin(), simplex.end(), [](const Vertex& v) { return v.cost == kInf; }))
      throw EstimationError("no feasible point in the initial simplex");
    if (static_cast<Index>(simplex.size()) < d + 1) return false;

    constexpr double reflect = 1.0, expand = 2.0, contract = 0.5, shrink = 0.5;
    for (;;) {
      std::stable_sort(simplex.begin(), simplex.end(),
                       [](const Vertex& a, const Vertex& b) { return a.cost < b.cost; });
      const double best_cost = simplex.front().cost;
      const double spread = simplex.back().cost - best_cost;
      if (std::isfinite(spread) && spread <= options_.tol * (std::abs(best_cost) + options_.tol))
        return true;
      if (!budget_left()) return false;

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
      for (Index i = 0; i < d; ++i) centroid += simplex[static_cast<std::size_t>(i)].x;
      centroid /= static_cast<double>(d);
      Vertex& worst = simplex.back();
      const double second_worst = simplex[static_cast<std::size_t>(d - 1)].cost;

      Vertex r = evaluate(centroid + reflect * (centroid - worst.x));
      if (r.cost < best_cost) {
        if (!budget_left()) {
          worst = std::move(r);
          continue;
        }
        Vertex e = evaluate(centroid + expand * (r.x - centroid));
        worst = e.cost < r.cost ? std::move(e) : std::move(r);
        continue;
      }
      if (r.cost < second_worst) {
        worst = std::move(r);
        continue;
      }
      if (!budget_left()) continue;
      const bool outside = r.cost < worst.cost;
      Vertex c = outside ? evaluate(centroid + contract * (r.x - centroid))
                         : evaluate(centroid + contract * (worst.x - centroid));
      if (outside ? c.cost <= r.cost : c.cost < worst.cost) {
        worst = std::move(c);
        continue;
      }
      for (std::size_t i = 1; i < simplex.size() && budget_left(); ++i)
        simplex[i] = evaluate(simplex[0].x + shrink * (simplex[i].x - simplex[0].x));
    }
  }

 private:
  const std::function<double(const Eigen::VectorXd&)>& f_;
  Eigen::VectorXd lower_, upper_;
  SimplexOptions options_;
  int evaluations_ = 0;
  Vertex best_;
};

}  // namespace

SimplexResult maximize_bounded(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& start, const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper, const SimplexOptions& options) {
  const Index d = start.size();
  if (d < 1 || lower.size() != d || upper.size() != d) throw SizeError("bounds must match the start point");
  if (!(lower.array() < upper.array()).all()) throw DomainError("each lower bound must be below its upper bound");
  if (options.max_evals < 1) throw DomainError("max_evals must be positive");

  SimplexSearch search(f, lower, upper, options);
  constexpr int kMaxRestarts = 8;
  bool converged = false;
  Eigen::VectorXd center = start;
  for (int run = 0; run <= kMaxRestarts; ++run) {
    const double before = search.best().cost;
    if (!search.run(center)) break;
    const double after = search.best().cost;
    // A restart that cannot improve on the previous optimum confirms it.
    if (run > 0 && before - after <= options.tol * (std::abs(after) + options.tol)) {
      converged = true;
      break;
    }
    if (run == kMaxRestarts) converged = true;
    center = search.best().x;
  }

  const auto& best = search.best();
  if (best.cost == kInf) throw EstimationError("no feasible point found");
  return SimplexResult{best.x, -best.cost, search.evaluations(), converged};
}

void FitConfig::validate() const {
  if (m < 1) throw DomainError("conditioning size m must be >= 1");
  if (!(tol >= 0.0)) throw DomainError("tol must be non-negative");
  if (max_evals < 1) throw DomainError("max_evals must be positive");
  const std::array<double, 3> start{init.sigma_sq, init.beta, init.nu};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(bounds[i].lo > 0.0) || !(bounds[i].hi > bounds[i].lo))
      throw DomainError("parameter bounds must satisfy 0 < lo < hi");
    if (start[i] < bounds[i].lo || start[i] > bounds[i].hi)
      throw DomainError("initial parameters must lie within the bounds");
  }
}

FitResult mle_estimate(const Dataset& train, const FitConfig& config, KernelFamily family) {
  config.validate();
  train.validate();

  std::vector<std::size_t> free{0, 1};
  if (config.free_nu) free.push_back(2);
  const auto d = static_cast<Index>(free.size());
  Eigen::VectorXd start(d), lower(d), upper(d);
  const std::array<double, 3> init{config.init.sigma_sq, config.init.beta, config.init.nu};
  for (Index i = 0; i < d; ++i) {
    const auto p = free[static_cast<std::size_t>(i)];
    start[i] = std::log(init[p]);
    lower[i] = std::log(config.bounds[p].lo);
    upper[i] = std::log(config.bounds[p].hi);
  }

  auto to_params = [&](const Eigen::VectorXd& z) {
    std::array<double, 3> theta = init;
    for (Index i = 0; i < d; ++i) {
      const auto p = free[static_cast<std::size_t>(i)];
      theta[p] = std::clamp(std::exp(z[i]), config.bounds[p].lo, config.bounds[p].hi);
    }
    return KernelParams{theta[0], theta[1], theta[2]};
  };

  std::function<double(const Eigen::VectorXd&)> objective;
  VecchiaPlan plan;
  Dataset ordered;
  if (config.objective == Objective::vecchia) {
    if (train.size() <= config.m) throw SizeError("Vecchia objective needs n > m");
    plan = make_plan(train, config.m, config.ordering, config.seed);
    ordered = plan.permutation.apply(train);
    objective = [&](const Eigen::VectorXd& z) {
      try {
        return vecchia_loglik(ordered, plan, KernelSpec{family, to_params(z)}).total;
      } catch (const InfeasibleError&) {
        return -kInf;
      }
    };
  } else {
    if (train.size() > config.max_dense_n) throw SizeError("exact objective exceeds the dense size guard");
    objective = [&](const Eigen::VectorXd& z) {
      try {
        return exact_loglik(train, KernelSpec{family, to_params(z)}, config.max_dense_n);
      } catch (const NotPositiveDefiniteError&) {
        return -kInf;
      }
    };
  }

  SimplexOptions options;
  options.tol = config.tol;
  options.max_evals = config.max_evals;
  const auto result = maximize_bounded(objective, start, lower, upper, options);
  return FitResult{to_params(result.x), result.value, result.evaluations, result.converged};
}

LinearTrend fit_linear_trend(const Dataset& raw) {
  raw.validate();
  const Index n = raw.size();
  if (n < 3) throw RegressionError("linear trend needs at least 3 locations");
  Eigen::MatrixXd design(n, 3);
  for (Index i = 0; i < n; ++i)
    design.row(i) << 1.0, raw.locations[static_cast<std::size_t>(i)].x, raw.locations[static_cast<std::size_t>(i)].y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < 3) throw RegressionError("locations are collinear; trend is not identifiable");
  const Eigen::Vector3d coef = qr.solve(raw.observations);
  return LinearTrend{coef[0], coef[1], coef[2]};
}

Dataset ols_detrend(const Dataset& raw) {
  const LinearTrend trend = fit_linear_trend(raw);
  Dataset out = raw;
  for (Index i = 0; i < out.size(); ++i) {
    const auto& loc = raw.locations[static_cast<std::size_t>(i)];
    out.observations[i] -= trend.intercept + trend.slope_x * loc.x + trend.slope_y * loc.y;
  }
  return out;
}

Dataset sqrt_transform(const Dataset& raw) {
  if ((raw.observations.array() < 0.0).any()) throw DomainError("square root of a negative observation");
  Dataset out = raw;
  out.observations = raw.observations.cwiseSqrt();
  return out;
}

PredictionReport krige_predict(const Dataset& train, const KernelSpec& spec,
                               std::span<const Location> test_locations, Index m) {
  train.validate();
  if (!spec.params.valid()) throw DomainError("kernel parameters must be positive");
  const Index n = train.size();
  if (m < 1 || m > n) throw SizeError("kriging needs 1 <= m <= n_train");
  const auto nt = static_cast<Index>(test_locations.size());
  const auto& metric = train.metric;

  PredictionReport report;
  report.predictions.resize(nt);
  report.conditional_variance.resize(nt);

  if (m == n) {
    // Whole training set: one factorization shared by every test point.
    Eigen::MatrixXd l = cov_matrix(std::span<const Location>(train.locations), spec, metric);
    if (kernels::potrf_lower(l.data(), n) != 0)
      throw NotPositiveDefiniteError("training covariance is not positive definite", 0);
    Eigen::VectorXd y_white = train.observations;
    kernels::trsv_lower(l.data(), n, y_white.data());
    parallel_for(nt, 16, [&](Index begin, Index end) {
      Eigen::VectorXd v(n);
      for (Index q = begin; q < end; ++q) {
        const auto& s = test_locations[static_cast<std::size_t>(q)];
        for (Index j = 0; j < n; ++j) v[j] = spec(metric(s, train.locations[static_cast<std::size_t>(j)]));
        kernels::trsv_lower(l.data(), n, v.data());
        report.predictions[q] = kernels::dot(v.data(), y_white.data(), n);
        report.conditional_variance[q] = spec.variance() - kernels::dot(v.data(), v.data(), n);
      }
    });
    return report;
  }

  const auto nb = nearest_reference_points(train.locations, test_locations, m, metric);
  StridedMatrixBatch<double> sigma(nt, m);
  StridedVectorBatch<double> v(nt, m), yj(nt, m);
  parallel_for(nt, 64, [&](Index begin, Index end) {
    for (Index q = begin; q < end; ++q) {
      const Index* idx = nb.data() + q * m;
      auto loc = [&](Index c) -> const Location& { return train.locations[static_cast<std::size_t>(idx[c])]; };
      double* a = sigma.entry_data(q);
      for (Index c = 0; c < m; ++c) {
        a[c * m + c] = spec.variance();
        for (Index r = c + 1; r < m; ++r) a[c * m + r] = a[r * m + c] = spec(metric(loc(r), loc(c)));
        v.entry_data(q)[c] = spec(metric(test_locations[static_cast<std::size_t>(q)], loc(c)));
        yj.entry_data(q)[c] = train.observations[idx[c]];
      }
    }
  });
  batch_potrf(sigma);
  batch_trsv_inplace(sigma, v);
  batch_trsv_inplace(sigma, yj);
  report.predictions = batch_dot(v, yj);
  report.conditional_variance = Eigen::VectorXd::Constant(nt, spec.variance()) - batch_dot(v, v);
  return report;
}

PredictionReport krige_predict(const Dataset& train, const KernelSpec& spec, const Dataset& test, Index m) {
  test.validate();
  auto report = krige_predict(train, spec, test.locations, m);
  report.mse = (report.predictions - test.observations).squaredNorm() / static_cast<double>(test.size());
  return report;
}

}  // namespace vecchia
