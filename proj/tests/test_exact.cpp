#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "vecchia/exact.hpp"
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

Eigen::MatrixXd random_spd(Index k, Rng& rng) {
  Eigen::MatrixXd b(k, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < k; ++i) b(i, j) = rng.normal();
  return b * b.transpose() + 0.5 * Eigen::MatrixXd::Identity(k, k);
}

// Precision of the Vecchia-implied density, Q = (I - A)' D^-1 (I - A) plus
// the inverse joint covariance of the first m points.
Eigen::MatrixXd vecchia_precision(const std::vector<Location>& ordered, const VecchiaPlan& plan,
                                  const KernelSpec& spec) {
  const Index n = static_cast<Index>(ordered.size());
  const Index m = plan.m;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  const std::vector<Location> head(ordered.begin(), ordered.begin() + m);
  q.topLeftCorner(m, m) = cov_matrix(std::span<const Location>(head), spec, plan.metric).inverse();
  for (Index i = m; i < n; ++i) {
    const auto nb = plan.neighbors[i];
    std::vector<Location> sub;
    Eigen::VectorXd c(m);
    for (Index k = 0; k < m; ++k) {
      sub.push_back(ordered[nb[k]]);
      c[k] = spec(plan.metric(ordered[i], ordered[nb[k]]));
    }
    const Eigen::MatrixXd s = cov_matrix(std::span<const Location>(sub), spec, plan.metric);
    const Eigen::VectorXd a = s.ldlt().solve(c);
    const double d = spec.variance() - c.dot(a);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
    row[i] = 1.0;
    for (Index k = 0; k < m; ++k) row[nb[k]] -= a[k];
    q += row * row.transpose() / d;
  }
  return q;
}

}  // namespace

TEST(ExactLoglik, SmallCases) {
  const KernelSpec unit{KernelFamily::matern, {1.0, 1.0, 0.5}};
  Dataset one{{{0.5, 0.5}}, Eigen::VectorXd::Zero(1), Metric::euclidean()};
  EXPECT_NEAR(exact_loglik(one, unit), -0.91893853, 1e-8);

  const double d = 0.4, rho = std::exp(-d);
  Dataset two{{{0, 0}, {0, d}}, Eigen::Vector2d(1.0, 0.5), Metric::euclidean()};
  const double det = 1 - rho * rho;
  const double quad = (1.0 - 2 * rho * 0.5 + 0.25) / det;
  EXPECT_NEAR(exact_loglik(two, unit), -kLog2Pi - 0.5 * std::log(det) - 0.5 * quad, 1e-13);

  // Far apart points are independent.
  Dataset far{{{0, 0}, {100, 0}}, Eigen::Vector2d(1.0, -2.0), Metric::euclidean()};
  EXPECT_NEAR(exact_loglik(far, unit), -kLog2Pi - 0.5 * 5.0, 1e-13);
}

TEST(ExactLoglik, MatchesLuOracle) {
  const KernelSpec spec{KernelFamily::matern, {1.5, 0.1, 1.5}};
  Dataset ds{uniform_points(120, 4), {}, Metric::euclidean()};
  ds.observations = simulate_grf(ds.locations, spec, ds.metric, 9);
  const Eigen::MatrixXd sigma = cov_matrix(std::span<const Location>(ds.locations), spec, ds.metric);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sigma);
  const double logdet = lu.matrixLU().diagonal().array().abs().log().sum();
  const double want = -0.5 * (120 * kLog2Pi + logdet + ds.observations.dot(lu.solve(ds.observations)));
  EXPECT_NEAR(exact_loglik(ds, spec), want, 1e-9 * std::abs(want));
}

TEST(ExactLoglik, Guards) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.1, 0.5}};
  Dataset ds{uniform_points(30, 1), Eigen::VectorXd::Zero(30), Metric::euclidean()};
  EXPECT_THROW(exact_loglik(ds, spec, 29), SizeError);
  EXPECT_NO_THROW(exact_loglik(ds, spec, 30));
  EXPECT_THROW(dense_covariance(ds.locations, spec, ds.metric, 10), SizeError);
  EXPECT_THROW(exact_loglik(ds, KernelSpec{KernelFamily::matern, {1.0, -0.1, 0.5}}), DomainError);
}

TEST(Simulate, DeterministicAndScaled) {
  const auto pts = uniform_points(50, 2);
  const KernelSpec one{KernelFamily::matern, {1.0, 0.1, 0.5}};
  const KernelSpec four{KernelFamily::matern, {4.0, 0.1, 0.5}};
  const auto a = simulate_grf(pts, one, Metric::euclidean(), 77);
  EXPECT_EQ(a, simulate_grf(pts, one, Metric::euclidean(), 77));
  EXPECT_NE(a, simulate_grf(pts, one, Metric::euclidean(), 78));
  EXPECT_LT((simulate_grf(pts, four, Metric::euclidean(), 77) - 2.0 * a).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Simulate, EmpiricalCovariance) {
  const std::vector<Location> pts{{0, 0}, {0.05, 0}, {0.3, 0.2}};
  const KernelSpec spec{KernelFamily::matern, {2.0, 0.1, 0.5}};
  const Eigen::MatrixXd sigma = cov_matrix(std::span<const Location>(pts), spec, Metric::euclidean());
  const int reps = 10000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(3, 3);
  for (int r = 0; r < reps; ++r) {
    const Eigen::VectorXd y = simulate_grf(pts, spec, Metric::euclidean(), derive_seed(5, r));
    acc += y * y.transpose();
  }
  acc /= reps;
  EXPECT_LT((acc - sigma).cwiseAbs().maxCoeff(), 0.05 * spec.variance());
}

TEST(KLGaussian, Values) {
  const Eigen::MatrixXd s = Eigen::Matrix2d{{2.0, 0.3}, {0.3, 1.0}};
  EXPECT_NEAR(kl_gaussian(s, s), 0.0, 1e-14);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Constant(1, 1, 1.0);
  const Eigen::MatrixXd two = Eigen::MatrixXd::Constant(1, 1, 2.0);
  EXPECT_NEAR(kl_gaussian(one, two), 0.09657359, 1e-8);
  EXPECT_THROW(kl_gaussian(one, s), SizeError);
}

TEST(KLGaussian, MatchesSpectralOracle) {
  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    const Eigen::MatrixXd s0 = random_spd(5, rng);
    const Eigen::MatrixXd s1 = random_spd(5, rng);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e0(s0), e1(s1);
    const Eigen::MatrixXd s1_inv =
        e1.eigenvectors() * e1.eigenvalues().cwiseInverse().asDiagonal() * e1.eigenvectors().transpose();
    const double want = 0.5 * ((s1_inv * s0).trace() - 5 + e1.eigenvalues().array().log().sum() -
                               e0.eigenvalues().array().log().sum());
    EXPECT_NEAR(kl_gaussian(s0, s1), want, 1e-10 * std::max(1.0, want));
    EXPECT_GT(kl_gaussian(s0, s1), 0.0);
  }
}

TEST(KLVecchia, MatchesImpliedPrecision) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.1, 0.5}};
  const auto pts = uniform_points(60, 7);
  const auto plan = make_plan(pts, 5, Ordering::random, 3, Metric::euclidean());
  const auto ordered = plan.permutation.apply(pts);
  const Eigen::MatrixXd sigma = cov_matrix(std::span<const Location>(ordered), spec, Metric::euclidean());
  const Eigen::MatrixXd q = vecchia_precision(ordered, plan, spec);
  const double want = kl_gaussian(sigma, q.inverse());
  const auto r = kl_vecchia(ordered, plan, spec);
  EXPECT_NEAR(r.kl, want, 1e-8 * std::max(1.0, want));
  EXPECT_GT(r.kl, 0.0);
  EXPECT_EQ(r.m, 5);
  EXPECT_NEAR(r.exact_ll0, -0.5 * (60 * kLog2Pi + std::log(sigma.determinant())), 1e-8);
}

TEST(KLVecchia, VanishesAtFullConditioning) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.05, 1.5}};
  const auto pts = uniform_points(200, 8);
  for (auto ordering : {Ordering::random, Ordering::morton}) {
    const auto plan = make_plan(pts, 199, ordering, 1, Metric::euclidean());
    EXPECT_LE(std::abs(kl_vecchia(plan.permutation.apply(pts), plan, spec).kl), 1e-8);
  }
}

TEST(KLSweep, DecreasesWithNestedConditioning) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.078809, 0.5}};
  const auto pts = uniform_points(400, 9);
  const std::vector<Ordering> orderings{Ordering::morton, Ordering::random};
  const std::vector<Index> ms{1, 5, 10, 30, 60, 399};
  const auto rows = kl_sweep(pts, Metric::euclidean(), orderings, ms, spec, 4);
  ASSERT_EQ(rows.size(), 12u);
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t j = 0; j < ms.size(); ++j) {
      const auto& r = rows[o * ms.size() + j];
      EXPECT_EQ(r.ordering, orderings[o]);
      EXPECT_EQ(r.m, ms[j]);
      EXPECT_EQ(r.exact_ll0, rows[0].exact_ll0);
      EXPECT_GE(r.kl, -1e-8);
      if (j > 0) EXPECT_LT(r.kl, rows[o * ms.size() + j - 1].kl);
    }
    EXPECT_LE(std::abs(rows[o * ms.size() + ms.size() - 1].kl), 1e-8);
  }
}

TEST(KLSweep, AgreesWithSinglePlan) {
  const KernelSpec spec{KernelFamily::matern, {1.0, 0.1, 1.5}};
  const auto pts = uniform_points(150, 10);
  const std::vector<Ordering> orderings{Ordering::random};
  const std::vector<Index> ms{12};
  const auto rows = kl_sweep(pts, Metric::euclidean(), orderings, ms, spec, 6);
  const auto plan = make_plan(pts, 12, Ordering::random, 6, Metric::euclidean());
  const auto single = kl_vecchia(plan.permutation.apply(pts), plan, spec);
  EXPECT_EQ(rows[0].vecchia_ll0, single.vecchia_ll0);
  EXPECT_NEAR(rows[0].kl, single.kl, 1e-9);
}
