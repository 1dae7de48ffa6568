#include "vecchia/exact.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "vecchia/random.hpp"

namespace vecchia {

namespace {

void check_guard(Index n, Index max_dense_n) {
  if (n > max_dense_n)
    throw SizeError("dense computation needs n <= " + std::to_string(max_dense_n) + " (got " +
                    std::to_string(n) + ")");
}

Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError("dense covariance is not positive definite", 0);
  return llt;
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

Eigen::MatrixXd dense_covariance(std::span<const Location> locations, const KernelSpec& spec,
                                 const Metric& metric, Index max_dense_n) {
  check_guard(static_cast<Index>(locations.size()), max_dense_n);
  return cov_matrix(locations, spec, metric);
}

double exact_loglik(const Dataset& dataset, const KernelSpec& spec, Index max_dense_n) {
  dataset.validate();
  if (!spec.params.valid()) throw DomainError("kernel parameters must be positive");
  const auto llt = factor(dense_covariance(dataset.locations, spec, dataset.metric, max_dense_n));
  const Eigen::VectorXd white = llt.matrixL().solve(dataset.observations);
  const double n = static_cast<double>(dataset.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * log_det(llt) - 0.5 * white.squaredNorm();
}

Eigen::VectorXd simulate_grf(std::span<const Location> locations, const KernelSpec& spec,
                             const Metric& metric, std::uint64_t seed, Index max_dense_n) {
  const auto llt = factor(dense_covariance(locations, spec, metric, max_dense_n));
  Rng rng(seed);
  Eigen::VectorXd z(static_cast<Index>(locations.size()));
  for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return llt.matrixL() * z;
}

double kl_gaussian(const Eigen::MatrixXd& sigma0, const Eigen::MatrixXd& sigma1) {
  if (sigma0.rows() != sigma0.cols() || sigma1.rows() != sigma1.cols() || sigma0.rows() != sigma1.rows())
    throw SizeError("kl_gaussian needs square matrices of equal order");
  const auto llt0 = factor(sigma0);
  const auto llt1 = factor(sigma1);
  // tr(S1^-1 S0) = ||L1^-1 L0||_F^2
  const Eigen::MatrixXd l0 = llt0.matrixL();
  const Eigen::MatrixXd w = llt1.matrixL().solve(l0);
  const double k = static_cast<double>(sigma0.rows());
  return 0.5 * (w.squaredNorm() - k + log_det(llt1) - log_det(llt0));
}

namespace {

double exact_ll_at_zero(std::span<const Location> locations, const KernelSpec& spec,
                        const Metric& metric, Index max_dense_n) {
  const auto llt = factor(dense_covariance(locations, spec, metric, max_dense_n));
  const double n = static_cast<double>(locations.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * log_det(llt);
}

double vecchia_ll_at_zero(std::span<const Location> ordered, const VecchiaPlan& plan,
                          const KernelSpec& spec) {
  const Dataset zero{std::vector<Location>(ordered.begin(), ordered.end()),
                     Eigen::VectorXd::Zero(static_cast<Index>(ordered.size())), plan.metric};
  return vecchia_loglik(zero, plan, spec).total;
}

}  // namespace

KLReport kl_vecchia(std::span<const Location> ordered, const VecchiaPlan& plan, const KernelSpec& spec,
                    Index max_dense_n) {
  KLReport r;
  r.m = plan.m;
  r.ordering = plan.ordering;
  r.exact_ll0 = exact_ll_at_zero(ordered, spec, plan.metric, max_dense_n);
  r.vecchia_ll0 = vecchia_ll_at_zero(ordered, plan, spec);
  r.kl = r.exact_ll0 - r.vecchia_ll0;
  return r;
}

std::vector<KLReport> kl_sweep(std::span<const Location> locations, const Metric& metric,
                               std::span<const Ordering> orderings, std::span<const Index> m_values,
                               const KernelSpec& spec, std::uint64_t seed, Index max_dense_n) {
  // The exact density is invariant to reordering, so one factorization serves all rows.
  const double exact_ll0 = exact_ll_at_zero(locations, spec, metric, max_dense_n);
  std::vector<KLReport> rows;
  for (const Ordering ordering : orderings) {
    const Permutation perm = ordering == Ordering::random
                                 ? random_ordering(static_cast<Index>(locations.size()), seed)
                                 : morton_ordering(locations);
    const auto ordered = perm.apply(locations);
    for (const Index m : m_values) {
      VecchiaPlan plan = make_ordered_plan(ordered, m, metric);
      plan.ordering = ordering;
      plan.seed = seed;
      plan.permutation = perm;
      KLReport r;
      r.m = m;
      r.ordering = ordering;
      r.exact_ll0 = exact_ll0;
      r.vecchia_ll0 = vecchia_ll_at_zero(ordered, plan, spec);
      r.kl = r.exact_ll0 - r.vecchia_ll0;
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace vecchia
