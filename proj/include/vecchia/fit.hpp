#ifndef VECCHIA_FIT_HPP
#define VECCHIA_FIT_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include <Eigen/Core>

#include "vecchia/exact.hpp"
#include "vecchia/geo.hpp"
#include "vecchia/kernels.hpp"

namespace vecchia {

// ---------------------------------------------------------------------------
// Bounded derivative-free maximization
// ---------------------------------------------------------------------------

struct SimplexOptions {
  /// Converged when the objective spread over the simplex is at most
  /// tol * (|f_best| + tol) and a restart from the best vertex gains no more.
  double tol = 1e-5;
  int max_evals = 500;
  /// Initial edge length as a fraction of each bound interval.
  double initial_step = 0.1;
};

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead maximization of f over the box [lower, upper]. Trial points
/// are clamped into the box. f may return -inf or NaN for infeasible
/// points; they are never selected as the best vertex. Throws
/// EstimationError if no vertex of the initial simplex is feasible.
SimplexResult maximize_bounded(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& start, const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper, const SimplexOptions& options = {});

// ---------------------------------------------------------------------------
// Maximum likelihood
// ---------------------------------------------------------------------------

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
};

enum class Objective { vecchia, exact };

struct FitConfig {
  Objective objective = Objective::vecchia;
  Index m = 60;
  Ordering ordering = Ordering::random;
  std::uint64_t seed = 0;
  /// Bounds on (sigma^2, beta, nu).
  std::array<Bounds, 3> bounds{{{1e-3, 1e2}, {1e-4, 1e1}, {0.05, 5.0}}};
  KernelParams init{1.0, 0.1, 0.5};
  /// nu stays at init.nu unless freed.
  bool free_nu = false;
  double tol = 1e-5;
  int max_evals = 500;
  Index max_dense_n = kDefaultMaxDenseN;

  void validate() const;
};

struct FitResult {
  KernelParams theta_hat;
  double loglik = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Maximizes the Vecchia or exact log-likelihood over theta. The search runs
/// on log-parameters inside the log-bounds; the Vecchia plan (ordering and
/// neighbors) is built once and reused for every evaluation.
FitResult mle_estimate(const Dataset& train, const FitConfig& config, KernelFamily family);

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

struct LinearTrend {
  double intercept = 0.0;
  double slope_x = 0.0;
  double slope_y = 0.0;
};

/// Least-squares fit value ~ a + b x + c y. Throws RegressionError when the
/// design is rank deficient.
LinearTrend fit_linear_trend(const Dataset& raw);

/// Residuals of the linear trend fit.
Dataset ols_detrend(const Dataset& raw);

/// Square root of every observation; negative values are a DomainError.
Dataset sqrt_transform(const Dataset& raw);

// ---------------------------------------------------------------------------
// Kriging
// ---------------------------------------------------------------------------

struct PredictionReport {
  Eigen::VectorXd predictions;
  Eigen::VectorXd conditional_variance;
  std::optional<double> mse;
};

/// Conditional-mean prediction from the m nearest training points of each
/// test location (whole training set when m == n_train).
PredictionReport krige_predict(const Dataset& train, const KernelSpec& spec,
                               std::span<const Location> test_locations, Index m);

/// As above, scoring the predictions against test.observations.
PredictionReport krige_predict(const Dataset& train, const KernelSpec& spec, const Dataset& test, Index m);

}  // namespace vecchia

#endif  // VECCHIA_FIT_HPP
