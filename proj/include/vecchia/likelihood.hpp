#ifndef VECCHIA_LIKELIHOOD_HPP
#define VECCHIA_LIKELIHOOD_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

#include <Eigen/Core>

#include "vecchia/batch.hpp"
#include "vecchia/errors.hpp"
#include "vecchia/geo.hpp"
#include "vecchia/kernels.hpp"
#include "vecchia/parallel.hpp"

namespace vecchia {

/// Ordering plus conditioning sets for one dataset size.
struct VecchiaPlan {
  Index m = 0;
  Ordering ordering = Ordering::random;
  std::uint64_t seed = 0;
  Permutation permutation;
  NeighborTable neighbors;
  Metric metric = Metric::euclidean();

  Index size() const noexcept { return permutation.size(); }
};

/// Orders `locations` and finds the m nearest predecessors of every point
/// in the new order. For n == 1 the plan is trivial (no neighbors).
VecchiaPlan make_plan(std::span<const Location> locations, Index m, Ordering ordering,
                      std::uint64_t seed, const Metric& metric);
VecchiaPlan make_plan(const Dataset& dataset, Index m, Ordering ordering, std::uint64_t seed);

/// Plan for locations that are already in the desired order.
VecchiaPlan make_ordered_plan(std::span<const Location> ordered, Index m, const Metric& metric);

/// Strided storage for the n - m + 1 conditioning problems.
///
/// Entry 0 is the joint block of the first m ordered points: Sigma[0] is
/// their covariance and both v[0] and yJ[0] hold y[0..m). Entry k >= 1
/// belongs to target i = m + k - 1: Sigma[k] is the covariance among J_i,
/// v[k] the cross-covariance C(s_i, s_J) and yJ[k] the neighbor values.
template <typename Scalar = double>
struct BatchWorkspace {
  StridedMatrixBatch<Scalar> sigma;
  StridedVectorBatch<Scalar> v;
  StridedVectorBatch<Scalar> y_neighbors;
  BatchScalars<Scalar> sigma_diag;

  Index m() const noexcept { return sigma.dim(); }
  Index count() const noexcept { return sigma.count(); }
};

template <typename Scalar = double>
struct Corrections {
  BatchScalars<Scalar> mu_prime;     // y'_k . v'_k
  BatchScalars<Scalar> sigma_prime;  // v'_k . v'_k
};

template <typename Scalar = double>
struct LogLikResult {
  Scalar total{0};
  Scalar block_first{0};
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> block_rest;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mu_new;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sigma_new;
};

namespace detail {
void check_plan(const Dataset& ordered, const VecchiaPlan& plan);
inline constexpr Index kAssemblyChunk = 64;
}  // namespace detail

/// Refills `ws` from a dataset already permuted by the plan. Storage is
/// reused when the shape already matches, otherwise reallocated.
template <typename Scalar>
void assemble_into(BatchWorkspace<Scalar>& ws, const Dataset& ordered, const VecchiaPlan& plan,
                   const BasicKernelSpec<Scalar>& spec) {
  detail::check_plan(ordered, plan);
  const Index n = ordered.size();
  const Index m = plan.m;
  const Index count = n - m + 1;
  const auto& locs = ordered.locations;
  const auto& metric = ordered.metric;
  const auto& y = ordered.observations;

  if (ws.sigma.count() != count || ws.sigma.dim() != m || ws.sigma.stride() != m * m) {
    ws = BatchWorkspace<Scalar>{StridedMatrixBatch<Scalar>(count, m), StridedVectorBatch<Scalar>(count, m),
                                StridedVectorBatch<Scalar>(count, m), BatchScalars<Scalar>(count)};
  }
  ws.sigma_diag.setConstant(spec.variance());

  auto fill_sigma = [&](Index k, auto index_of) {
    Scalar* a = ws.sigma.entry_data(k);
    for (Index c = 0; c < m; ++c) {
      const Location& sc = locs[static_cast<std::size_t>(index_of(c))];
      a[c * m + c] = spec.variance();
      for (Index r = c + 1; r < m; ++r) {
        const Scalar value =
            spec(static_cast<Scalar>(metric(locs[static_cast<std::size_t>(index_of(r))], sc)));
        a[c * m + r] = value;
        a[r * m + c] = value;
      }
    }
  };

  parallel_for(count, detail::kAssemblyChunk, [&](Index begin, Index end) {
    for (Index k = begin; k < end; ++k) {
      if (k + 1 < count) {
        // Neighbor sets are scattered under random ordering; fetch the next block's early.
        for (const Index j : plan.neighbors[m + k]) {
          __builtin_prefetch(&locs[static_cast<std::size_t>(j)]);
          __builtin_prefetch(&y[j]);
        }
      }
      Scalar* v = ws.v.entry_data(k);
      Scalar* yj = ws.y_neighbors.entry_data(k);
      if (k == 0) {
        fill_sigma(0, [](Index c) { return c; });
        for (Index c = 0; c < m; ++c) v[c] = yj[c] = static_cast<Scalar>(y[c]);
        continue;
      }
      const Index target = m + k - 1;
      const auto nb = plan.neighbors[target];
      fill_sigma(k, [&](Index c) { return nb[static_cast<std::size_t>(c)]; });
      const Location& st = locs[static_cast<std::size_t>(target)];
      for (Index c = 0; c < m; ++c) {
        const Index j = nb[static_cast<std::size_t>(c)];
        v[c] = spec(static_cast<Scalar>(metric(st, locs[static_cast<std::size_t>(j)])));
        yj[c] = static_cast<Scalar>(y[j]);
      }
    }
  });
}

/// Fills a new batch workspace from a dataset already permuted by the plan.
template <typename Scalar = double>
BatchWorkspace<Scalar> assemble(const Dataset& ordered, const VecchiaPlan& plan,
                                const BasicKernelSpec<Scalar>& spec) {
  BatchWorkspace<Scalar> ws;
  assemble_into(ws, ordered, plan, spec);
  return ws;
}

/// Batched POTRF on Sigma, TRSV on v and yJ, then the two dot products.
/// The workspace is overwritten with the factors and solved vectors.
/// A non-positive-definite block raises InfeasibleError.
template <typename Scalar>
Corrections<Scalar> factor_and_solve(BatchWorkspace<Scalar>& ws) {
  try {
    batch_potrf(ws.sigma);
  } catch (const NotPositiveDefiniteError& e) {
    throw InfeasibleError("conditioning matrix is not positive definite", e.entry());
  }
  batch_trsv_inplace(ws.sigma, ws.v);
  batch_trsv_inplace(ws.sigma, ws.y_neighbors);
  return {batch_dot(ws.y_neighbors, ws.v), batch_dot(ws.v, ws.v)};
}

/// Per-block log-densities from the corrections and their ordered sum.
template <typename Scalar>
LogLikResult<Scalar> reduce(const BatchWorkspace<Scalar>& ws, const Corrections<Scalar>& corr,
                            const Eigen::VectorXd& y_ordered) {
  const Index m = ws.m();
  const Index rest = ws.count() - 1;
  const Scalar log_2pi = static_cast<Scalar>(std::log(2.0 * std::numbers::pi));

  LogLikResult<Scalar> out;
  out.block_first = -half_log_det(ws.sigma[0]) - corr.mu_prime[0] / Scalar(2) -
                    static_cast<Scalar>(m) / Scalar(2) * log_2pi;
  out.block_rest.resize(rest);
  out.mu_new = corr.mu_prime.tail(rest);
  out.sigma_new = ws.sigma_diag.tail(rest) - corr.sigma_prime.tail(rest);

  for (Index k = 0; k < rest; ++k) {
    if (!(out.sigma_new[k] > Scalar(0)))
      throw InfeasibleError("conditional variance is not positive", k + 1);
  }
  parallel_for(rest, 4096, [&](Index begin, Index end) {
    for (Index k = begin; k < end; ++k) {
      const Scalar resid = static_cast<Scalar>(y_ordered[m + k]) - out.mu_new[k];
      const Scalar var = out.sigma_new[k];
      out.block_rest[k] = Scalar(-0.5) * (resid * resid / var + log_2pi + std::log(var));
    }
  });

  out.total = out.block_first;
  for (Index k = 0; k < rest; ++k) out.total += out.block_rest[k];
  return out;
}

/// Vecchia log-likelihood of a dataset already permuted by plan.permutation.
///
/// n == 1 is evaluated exactly as a univariate Gaussian. Throws
/// InfeasibleError when the parameters make any block degenerate.
template <typename Scalar = double>
LogLikResult<Scalar> vecchia_loglik(const Dataset& ordered, const VecchiaPlan& plan,
                                    const BasicKernelSpec<Scalar>& spec) {
  if (!spec.params.valid()) throw DomainError("kernel parameters must be positive");
  if (ordered.size() == 1 && plan.size() == 1) {
    const Scalar var = spec.variance();
    const auto y0 = static_cast<Scalar>(ordered.observations[0]);
    LogLikResult<Scalar> out;
    out.block_first = Scalar(-0.5) * (y0 * y0 / var + static_cast<Scalar>(std::log(2.0 * std::numbers::pi)) +
                                      std::log(var));
    out.total = out.block_first;
    return out;
  }
  auto ws = assemble(ordered, plan, spec);
  const auto corr = factor_and_solve(ws);
  return reduce(ws, corr, ordered.observations);
}

/// Flop model per likelihood: one m x m Cholesky, two triangular solves and
/// two dot products for each of the n - m + 1 blocks.
double flop_count(Index n, Index m);

/// Leading term n m^3 / 3 of the model.
double leading_flop_count(Index n, Index m);

}  // namespace vecchia

#endif  // VECCHIA_LIKELIHOOD_HPP
