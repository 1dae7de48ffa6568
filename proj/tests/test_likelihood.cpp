#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "vecchia/exact.hpp"
#include "vecchia/likelihood.hpp"
#include "vecchia/random.hpp"

using namespace vecchia;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::vector<Location> uniform_points(Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Location> pts(static_cast<std::size_t>(n));
  for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
  return pts;
}

Dataset simulated(Index n, const KernelSpec& spec, std::uint64_t seed) {
  Dataset ds{uniform_points(n, seed), {}, Metric::euclidean()};
  ds.observations = simulate_grf(ds.locations, spec, ds.metric, seed + 1000);
  return ds;
}

double gaussian_logpdf(const Eigen::VectorXd& y, const Eigen::MatrixXd& cov) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const double logdet = ldlt.vectorD().array().log().sum();
  return -0.5 * (y.dot(ldlt.solve(y)) + logdet + static_cast<double>(y.size()) * kLog2Pi);
}

// Product of explicit conditionals, each solved with LDLT.
double conditional_oracle(const Dataset& ordered, const VecchiaPlan& plan, const KernelSpec& spec) {
  const Index m = plan.m;
  const auto& loc = ordered.locations;
  const auto& y = ordered.observations;
  std::vector<Location> head(loc.begin(), loc.begin() + m);
  double total = gaussian_logpdf(y.head(m), cov_matrix(std::span<const Location>(head), spec, ordered.metric));
  for (Index i = m; i < ordered.size(); ++i) {
    const auto nb = plan.neighbors[i];
    std::vector<Location> sub;
    Eigen::VectorXd yj(m), c(m);
    for (Index k = 0; k < m; ++k) {
      sub.push_back(loc[nb[k]]);
      yj[k] = y[nb[k]];
      c[k] = spec(ordered.metric(loc[i], loc[nb[k]]));
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov_matrix(std::span<const Location>(sub), spec, ordered.metric));
    const double mu = c.dot(ldlt.solve(yj));
    const double var = spec.variance() - c.dot(ldlt.solve(c));
    total += -0.5 * ((y[i] - mu) * (y[i] - mu) / var + kLog2Pi + std::log(var));
  }
  return total;
}

}  // namespace

TEST(VecchiaLoglik, SinglePoint) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.1, 0.5}};
  Dataset ds{{{0.2, 0.3}}, Eigen::VectorXd::Zero(1), Metric::euclidean()};
  const auto plan = make_plan(ds, 1, Ordering::random, 0);
  EXPECT_NEAR(vecchia_loglik(ds, plan, spec).total, -0.91893853, 1e-8);
  ds.observations[0] = 2.0;
  const KernelSpec wide{KernelFamily::matern, {4.0, 0.1, 0.5}};
  EXPECT_NEAR(vecchia_loglik(ds, plan, wide).total, -0.5 * (1.0 + kLog2Pi + std::log(4.0)), 1e-14);
}

TEST(VecchiaLoglik, BivariateExponential) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 1.0, 0.5}};
  const double d = 0.7;
  const double rho = std::exp(-d);
  const double y0 = 0.4, y1 = -1.1;
  Dataset ds{{{0, 0}, {d, 0}}, Eigen::Vector2d(y0, y1), Metric::euclidean()};
  const auto plan = make_ordered_plan(ds.locations, 1, ds.metric);
  const double det = 1 - rho * rho;
  const double expected =
      -kLog2Pi - 0.5 * std::log(det) - 0.5 * (y0 * y0 - 2 * rho * y0 * y1 + y1 * y1) / det;
  const auto r = vecchia_loglik(ds, plan, spec);
  EXPECT_NEAR(r.total, expected, 1e-13);
  EXPECT_NEAR(r.mu_new[0], rho * y0, 1e-15);
  EXPECT_NEAR(r.sigma_new[0], det, 1e-15);
}

TEST(VecchiaLoglik, FullConditioningEqualsExact) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.078809, 0.5}};
  const auto ds = simulated(300, spec, 3);
  const double exact = exact_loglik(ds, spec);
  for (auto ordering : {Ordering::random, Ordering::morton}) {
    const auto plan = make_plan(ds, 299, ordering, 5);
    const double v = vecchia_loglik(plan.permutation.apply(ds), plan, spec).total;
    EXPECT_LT(std::abs(v - exact), 1e-8 * std::abs(exact)) << to_string(ordering);
  }
}

TEST(VecchiaLoglik, MatchesConditionalOracle) {
  for (double nu : {0.5, 1.5, 1.1}) {
    const KernelSpec spec{KernelFamily::matern, {1.4, 0.05, nu}};
    const auto ds = simulated(150, spec, 11);
    const auto plan = make_plan(ds, 10, Ordering::morton, 0);
    const auto ordered = plan.permutation.apply(ds);
    const double got = vecchia_loglik(ordered, plan, spec).total;
    const double want = conditional_oracle(ordered, plan, spec);
    EXPECT_LT(std::abs(got - want), 1e-9 * std::abs(want)) << nu;
  }
  const KernelSpec powexp{KernelFamily::power_exponential, {1.0, 0.1, 1.3}};
  const auto ds = simulated(120, powexp, 12);
  const auto plan = make_plan(ds, 6, Ordering::random, 9);
  const auto ordered = plan.permutation.apply(ds);
  EXPECT_NEAR(vecchia_loglik(ordered, plan, powexp).total, conditional_oracle(ordered, plan, powexp), 1e-8);
}

TEST(VecchiaLoglik, PermutationInvariantAtFullConditioning) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.1, 1.5}};
  const auto ds = simulated(80, spec, 21);
  double first = 0.0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto plan = make_plan(ds, 79, Ordering::random, seed);
    const double v = vecchia_loglik(plan.permutation.apply(ds), plan, spec).total;
    if (seed == 0) first = v;
    EXPECT_NEAR(v, first, 1e-9 * std::abs(first));
  }
}

TEST(VecchiaLoglik, TotalIsOrderedSumOfBlocks) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.05, 0.5}};
  const auto ds = simulated(400, spec, 31);
  const auto plan = make_plan(ds, 15, Ordering::random, 2);
  const auto r = vecchia_loglik(plan.permutation.apply(ds), plan, spec);
  ASSERT_EQ(r.block_rest.size(), 400 - 15);
  double sum = r.block_first;
  for (Index k = 0; k < r.block_rest.size(); ++k) sum += r.block_rest[k];
  EXPECT_EQ(r.total, sum);
  EXPECT_TRUE((r.sigma_new.array() > 0).all());
  EXPECT_TRUE((r.sigma_new.array() <= spec.variance()).all());
}

TEST(VecchiaLoglik, IndependentOfThreadCount) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.05, 1.5}};
  const auto ds = simulated(1500, spec, 41);
  const auto plan = make_plan(ds, 20, Ordering::morton, 0);
  const auto ordered = plan.permutation.apply(ds);
  set_max_threads(1);
  const auto a = vecchia_loglik(ordered, plan, spec);
  set_max_threads(4);
  const auto b = vecchia_loglik(ordered, plan, spec);
  set_max_threads(1);
  EXPECT_EQ(a.total, b.total);
  EXPECT_EQ(a.block_rest, b.block_rest);
}

TEST(VecchiaLoglik, SinglePrecision) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.1, 0.5}};
  const auto ds = simulated(200, spec, 51);
  const auto plan = make_plan(ds, 8, Ordering::morton, 0);
  const auto ordered = plan.permutation.apply(ds);
  const BasicKernelSpec<float> fspec{KernelFamily::matern, {1.0f, 0.1f, 0.5f}};
  const double d = vecchia_loglik(ordered, plan, spec).total;
  const float f = vecchia_loglik(ordered, plan, fspec).total;
  EXPECT_NEAR(f, d, 1e-3 * std::abs(d));
}

TEST(Assemble, EntriesMatchKernel) {
  const KernelSpec spec{KernelFamily::matern, {2.0, 0.3, 1.5}};
  const auto ds = simulated(5, spec, 61);
  const auto plan = make_ordered_plan(ds.locations, 2, ds.metric);
  const auto ws = assemble(ds, plan, spec);
  ASSERT_EQ(ws.count(), 4);
  ASSERT_EQ(ws.m(), 2);
  const auto& loc = ds.locations;
  EXPECT_EQ(ws.sigma[0](0, 0), 2.0);
  EXPECT_EQ(ws.sigma[0](1, 0), spec(euclidean_distance(loc[0], loc[1])));
  EXPECT_EQ(ws.v[0], ds.observations.head(2));
  EXPECT_EQ(ws.y_neighbors[0], ds.observations.head(2));
  for (Index k = 1; k < 4; ++k) {
    const Index target = 2 + k - 1;
    const auto nb = plan.neighbors[target];
    for (Index a = 0; a < 2; ++a) {
      EXPECT_EQ(ws.v[k][a], spec(euclidean_distance(loc[target], loc[nb[a]])));
      EXPECT_EQ(ws.y_neighbors[k][a], ds.observations[nb[a]]);
      for (Index b = 0; b < 2; ++b) {
        const double want = a == b ? 2.0 : spec(euclidean_distance(loc[nb[a]], loc[nb[b]]));
        EXPECT_EQ(ws.sigma[k](a, b), want);
      }
    }
  }
  EXPECT_TRUE((ws.sigma_diag.array() == 2.0).all());
}

TEST(Assemble, SmallestBatch) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.3, 0.5}};
  const auto ds = simulated(7, spec, 62);
  const auto plan = make_ordered_plan(ds.locations, 6, ds.metric);
  const auto ws = assemble(ds, plan, spec);
  EXPECT_EQ(ws.count(), 2);
  EXPECT_EQ(ws.sigma.stride(), 36);
  EXPECT_EQ(ws.sigma_diag.size(), 2);
}

TEST(Assemble, RejectsMismatchedPlan) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.3, 0.5}};
  const auto ds = simulated(10, spec, 63);
  const auto small = simulated(9, spec, 64);
  const auto plan = make_ordered_plan(small.locations, 3, small.metric);
  EXPECT_THROW(assemble(ds, plan, spec), SizeError);
  Dataset sphere = ds;
  sphere.metric = Metric::great_circle();
  EXPECT_THROW(assemble(sphere, make_ordered_plan(ds.locations, 3, ds.metric), spec), SizeError);
  EXPECT_THROW(make_ordered_plan(ds.locations, 10, ds.metric), SizeError);
}

TEST(Infeasible, ReportsBlockIndex) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.3, 0.5}};
  const auto ds = simulated(12, spec, 71);
  const auto plan = make_ordered_plan(ds.locations, 3, ds.metric);

  auto ws = assemble(ds, plan, spec);
  ws.sigma[4](1, 1) = -1.0;
  try {
    factor_and_solve(ws);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.block(), 4);
  }

  auto ws2 = assemble(ds, plan, spec);
  auto corr = factor_and_solve(ws2);
  ws2.sigma_diag[6] = corr.sigma_prime[6];
  try {
    reduce(ws2, corr, ds.observations);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.block(), 6);
  }
}

TEST(Infeasible, InvalidParameters) {
  const KernelSpec bad{KernelFamily::matern, {0.0, 0.3, 0.5}};
  const auto ds = simulated(12, KernelSpec{KernelFamily::matern, {1.0, 0.3, 0.5}}, 72);
  EXPECT_THROW(vecchia_loglik(ds, make_ordered_plan(ds.locations, 3, ds.metric), bad), DomainError);
}

TEST(FlopModel, Values) {
  EXPECT_DOUBLE_EQ(leading_flop_count(100000, 60), 7.2e9);
  // B = 2: 2 * (1/3 + 2 + 4) for m = 1.
  EXPECT_DOUBLE_EQ(flop_count(2, 1), 2.0 * (1.0 / 3 + 6));
  EXPECT_DOUBLE_EQ(flop_count(100000, 60), 99941.0 * (72000.0 + 7200.0 + 240.0));
  const double step = flop_count(1001, 30) - flop_count(1000, 30);
  EXPECT_DOUBLE_EQ(flop_count(5001, 30) - flop_count(5000, 30), step);
  EXPECT_DOUBLE_EQ(flop_count(200000, 30) / flop_count(100000, 30),
                   (200000.0 - 29) / (100000.0 - 29));
  EXPECT_LT(std::abs(flop_count(100000, 60) / leading_flop_count(100000, 60) - 1), 0.2);
  EXPECT_THROW(flop_count(5, 5), SizeError);
}
