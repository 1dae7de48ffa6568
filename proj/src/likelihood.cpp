#include "vecchia/likelihood.hpp"

#include <string>

namespace vecchia {

VecchiaPlan make_plan(std::span<const Location> locations, Index m, Ordering ordering,
                      std::uint64_t seed, const Metric& metric) {
  const auto n = static_cast<Index>(locations.size());
  if (m < 1) throw SizeError("conditioning size m must be >= 1");
  VecchiaPlan plan;
  plan.m = m;
  plan.ordering = ordering;
  plan.seed = seed;
  plan.metric = metric;
  plan.permutation = ordering == Ordering::random ? random_ordering(n, seed) : morton_ordering(locations);
  if (n == 1) return plan;
  const auto ordered = plan.permutation.apply(locations);
  plan.neighbors = nearest_neighbors(ordered, m, metric);
  return plan;
}

VecchiaPlan make_plan(const Dataset& dataset, Index m, Ordering ordering, std::uint64_t seed) {
  return make_plan(dataset.locations, m, ordering, seed, dataset.metric);
}

VecchiaPlan make_ordered_plan(std::span<const Location> ordered, Index m, const Metric& metric) {
  const auto n = static_cast<Index>(ordered.size());
  if (m < 1) throw SizeError("conditioning size m must be >= 1");
  VecchiaPlan plan;
  plan.m = m;
  plan.metric = metric;
  plan.permutation = Permutation::identity(n);
  if (n > 1) plan.neighbors = nearest_neighbors(ordered, m, metric);
  return plan;
}

namespace detail {

void check_plan(const Dataset& ordered, const VecchiaPlan& plan) {
  if (ordered.size() != plan.size())
    throw SizeError("plan size " + std::to_string(plan.size()) + " does not match dataset size " +
                    std::to_string(ordered.size()));
  if (ordered.size() <= plan.m)
    throw SizeError("need n > m (n = " + std::to_string(ordered.size()) +
                    ", m = " + std::to_string(plan.m) + ")");
  if (!(ordered.metric == plan.metric)) throw SizeError("plan metric does not match dataset metric");
  if (plan.neighbors.size() != ordered.size() || plan.neighbors.m() != plan.m)
    throw SizeError("neighbor table does not match plan");
}

}  // namespace detail

double flop_count(Index n, Index m) {
  if (m < 1 || n <= m) throw SizeError("flop_count needs n > m >= 1");
  const double blocks = static_cast<double>(n - m + 1);
  const double md = static_cast<double>(m);
  return blocks * (md * md * md / 3.0) + 2.0 * blocks * md * md + 4.0 * blocks * md;
}

double leading_flop_count(Index n, Index m) {
  const double md = static_cast<double>(m);
  return static_cast<double>(n) * md * md * md / 3.0;
}

}  // namespace vecchia
