#ifndef VECCHIA_EXACT_HPP
#define VECCHIA_EXACT_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vecchia/geo.hpp"
#include "vecchia/kernels.hpp"
#include "vecchia/likelihood.hpp"

namespace vecchia {

inline constexpr Index kDefaultMaxDenseN = 20000;

/// Full n x n covariance Sigma(theta). Throws SizeError above the guard.
Eigen::MatrixXd dense_covariance(std::span<const Location> locations, const KernelSpec& spec,
                                 const Metric& metric, Index max_dense_n = kDefaultMaxDenseN);

/// Dense Gaussian log-likelihood -n/2 log 2pi - 1/2 log|Sigma| - 1/2 y' Sigma^-1 y.
/// Throws NotPositiveDefiniteError (entry 0) if Sigma cannot be factored.
double exact_loglik(const Dataset& dataset, const KernelSpec& spec,
                    Index max_dense_n = kDefaultMaxDenseN);

/// y = L z with L = chol(Sigma) and z standard normal from Rng(seed).
Eigen::VectorXd simulate_grf(std::span<const Location> locations, const KernelSpec& spec,
                             const Metric& metric, std::uint64_t seed,
                             Index max_dense_n = kDefaultMaxDenseN);

/// KL divergence of N(0, sigma0) from N(0, sigma1).
double kl_gaussian(const Eigen::MatrixXd& sigma0, const Eigen::MatrixXd& sigma1);

struct KLReport {
  Index m = 0;
  Ordering ordering = Ordering::random;
  double kl = 0.0;
  double exact_ll0 = 0.0;
  double vecchia_ll0 = 0.0;
};

/// KL divergence of the Vecchia-implied Gaussian from the exact one,
/// computed as l_exact(theta; 0) - l_vecchia(theta; 0). `ordered` must be
/// the locations permuted by plan.permutation.
KLReport kl_vecchia(std::span<const Location> ordered, const VecchiaPlan& plan, const KernelSpec& spec,
                    Index max_dense_n = kDefaultMaxDenseN);

/// One KLReport per (ordering, m) pair, in the given order. The exact term
/// is computed once and shared by every row.
std::vector<KLReport> kl_sweep(std::span<const Location> locations, const Metric& metric,
                               std::span<const Ordering> orderings, std::span<const Index> m_values,
                               const KernelSpec& spec, std::uint64_t seed,
                               Index max_dense_n = kDefaultMaxDenseN);

}  // namespace vecchia

#endif  // VECCHIA_EXACT_HPP
