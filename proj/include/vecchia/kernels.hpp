#ifndef VECCHIA_KERNELS_HPP
#define VECCHIA_KERNELS_HPP

#include <cmath>
#include <span>
#include <string_view>

#include <Eigen/Core>

#include "vecchia/errors.hpp"
#include "vecchia/geo.hpp"

namespace vecchia {

/// theta = (sigma^2, beta, nu). For the power-exponential family nu is the
/// distance exponent (often written alpha).
template <typename Scalar>
struct BasicKernelParams {
  Scalar sigma_sq{1};
  Scalar beta{1};
  Scalar nu{Scalar(0.5)};

  bool valid() const { return sigma_sq > 0 && beta > 0 && nu > 0; }
  friend bool operator==(const BasicKernelParams&, const BasicKernelParams&) = default;
};
using KernelParams = BasicKernelParams<double>;

enum class KernelFamily { matern, power_exponential };

std::string_view to_string(KernelFamily family);
KernelFamily parse_kernel_family(std::string_view name);

/// Modified Bessel function of the second kind K_nu(x), x > 0.
double bessel_kv(double nu, double x);

/// Matern covariance at lag d. Half-integer nu in {0.5, 1.5, 2.5} use the
/// closed forms; d == 0 returns sigma^2.
template <typename Scalar>
Scalar matern_cov(Scalar d, const BasicKernelParams<Scalar>& p) {
  using std::exp;
  if (d == Scalar(0)) return p.sigma_sq;
  const Scalar u = d / p.beta;
  if (p.nu == Scalar(0.5)) return p.sigma_sq * exp(-u);
  if (p.nu == Scalar(1.5)) return p.sigma_sq * (Scalar(1) + u) * exp(-u);
  if (p.nu == Scalar(2.5)) return p.sigma_sq * (Scalar(1) + u + u * u / Scalar(3)) * exp(-u);
  const double ud = static_cast<double>(u);
  const double nu = static_cast<double>(p.nu);
  if (ud < 1e-12) return p.sigma_sq;
  const double scale = std::exp((1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(ud));
  return p.sigma_sq * static_cast<Scalar>(scale * bessel_kv(nu, ud));
}

template <typename Scalar>
Scalar powexp_cov(Scalar d, const BasicKernelParams<Scalar>& p) {
  using std::exp;
  using std::pow;
  if (d == Scalar(0)) return p.sigma_sq;
  return p.sigma_sq * exp(-pow(d, p.nu) / p.beta);
}

template <typename Scalar>
struct BasicKernelSpec {
  KernelFamily family = KernelFamily::matern;
  BasicKernelParams<Scalar> params;

  Scalar operator()(Scalar d) const {
    return family == KernelFamily::matern ? matern_cov(d, params) : powexp_cov(d, params);
  }
  Scalar variance() const { return params.sigma_sq; }
};
using KernelSpec = BasicKernelSpec<double>;

/// Range parameter beta for the nine (effective range, smoothness) pairs of
/// the numerical study grid. Throws LookupError for any other pair.
///
/// Note: the published grid repeats 0.014290 for nu = 2.5 at both effective
/// range 0.1 and 0.3; it is reproduced as published.
double beta_from_effective_range(double effective_range, double nu);

/// Cross-covariance matrix C(d(a_i, b_j)).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cov_matrix(
    std::span<const Location> a, std::span<const Location> b,
    const BasicKernelSpec<Scalar>& spec, const Metric& metric) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(static_cast<Index>(a.size()),
                                                            static_cast<Index>(b.size()));
  for (Index j = 0; j < out.cols(); ++j)
    for (Index i = 0; i < out.rows(); ++i)
      out(i, j) = spec(static_cast<Scalar>(metric(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)])));
  return out;
}

/// Symmetric covariance of one location set; only half the kernel
/// evaluations are performed and the diagonal is exactly sigma^2.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cov_matrix(
    std::span<const Location> locs, const BasicKernelSpec<Scalar>& spec, const Metric& metric) {
  const auto n = static_cast<Index>(locs.size());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(n, n);
  for (Index j = 0; j < n; ++j) {
    out(j, j) = spec.variance();
    for (Index i = j + 1; i < n; ++i) {
      out(i, j) = spec(static_cast<Scalar>(metric(locs[static_cast<std::size_t>(i)], locs[static_cast<std::size_t>(j)])));
      out(j, i) = out(i, j);
    }
  }
  return out;
}

}  // namespace vecchia

#endif  // VECCHIA_KERNELS_HPP
