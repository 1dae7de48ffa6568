#ifndef VECCHIA_GEO_HPP
#define VECCHIA_GEO_HPP

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "vecchia/errors.hpp"

namespace vecchia {

/// A point in the plane: unit-square coordinates, or (longitude, latitude)
/// in degrees for great-circle data.
struct Location {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

inline constexpr double kEarthRadiusKm = 6371.0;

double euclidean_distance(const Location& a, const Location& b);

/// Haversine distance between (lon, lat) points given in degrees.
/// Throws DomainError for |lat| > 90 or radius <= 0.
double great_circle_distance(const Location& a, const Location& b,
                             double radius = kEarthRadiusKm);

class Metric {
 public:
  enum class Kind { euclidean, great_circle };

  static Metric euclidean() { return Metric(Kind::euclidean, 0.0); }
  static Metric great_circle(double radius = kEarthRadiusKm);

  Kind kind() const noexcept { return kind_; }
  double radius() const noexcept { return radius_; }

  double operator()(const Location& a, const Location& b) const {
    return kind_ == Kind::euclidean ? euclidean_distance(a, b)
                                    : great_circle_distance(a, b, radius_);
  }

  friend bool operator==(const Metric&, const Metric&) = default;

 private:
  Metric(Kind kind, double radius) : kind_(kind), radius_(radius) {}
  Kind kind_ = Kind::euclidean;
  double radius_ = 0.0;
};

struct Dataset {
  std::vector<Location> locations;
  Eigen::VectorXd observations;
  Metric metric = Metric::euclidean();

  Index size() const noexcept { return static_cast<Index>(locations.size()); }

  /// Checks n >= 1, matching lengths, finite values and latitude range.
  void validate() const;
};

/// order[k] is the original index of the point placed at position k.
struct Permutation {
  std::vector<Index> order;

  Index size() const noexcept { return static_cast<Index>(order.size()); }
  bool is_bijection() const;

  static Permutation identity(Index n);

  std::vector<Location> apply(std::span<const Location> locations) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& values) const;
  Dataset apply(const Dataset& dataset) const;
};

enum class Ordering { random, morton };

std::string_view to_string(Ordering ordering);
Ordering parse_ordering(std::string_view name);

Permutation random_ordering(Index n, std::uint64_t seed);

/// Interleaves two 16-bit coordinates; x takes the even bit positions.
std::uint32_t morton_code(std::uint16_t qx, std::uint16_t qy);

/// Z-order over 16-bit bounding-box quantization, stable on ties.
Permutation morton_ordering(std::span<const Location> locations);

/// Conditioning sets of the Vecchia factorization, 0-based.
///
/// For every target i in [m, n) the table stores exactly m predecessor
/// indices (all < i), sorted by increasing distance with ties broken by the
/// smaller index. Targets i < m have no entry; they belong to the joint
/// first block.
class NeighborTable {
 public:
  NeighborTable() = default;
  NeighborTable(Index n, Index m) : n_(n), m_(m), data_(static_cast<std::size_t>((n - m) * m)) {}

  Index size() const noexcept { return n_; }
  Index m() const noexcept { return m_; }

  std::span<const Index> operator[](Index target) const {
    return {data_.data() + (target - m_) * m_, static_cast<std::size_t>(m_)};
  }
  std::span<Index> operator[](Index target) {
    return {data_.data() + (target - m_) * m_, static_cast<std::size_t>(m_)};
  }

  friend bool operator==(const NeighborTable&, const NeighborTable&) = default;

 private:
  Index n_ = 0;
  Index m_ = 0;
  std::vector<Index> data_;
};

/// The m nearest predecessors of every ordered location (n > m >= 1).
/// Euclidean data goes through a uniform-grid search, great-circle data
/// through the brute-force scan; both give identical tables.
NeighborTable nearest_neighbors(std::span<const Location> ordered, Index m, const Metric& metric);
NeighborTable nearest_neighbors(const Dataset& ordered, Index m);

/// Exhaustive O(n^2) predecessor scan.
NeighborTable nearest_neighbors_bruteforce(std::span<const Location> ordered, Index m,
                                           const Metric& metric);

/// The m nearest reference locations to each query point, over the whole
/// reference set (no predecessor restriction). Row q holds the indices for
/// query q, sorted by distance then index.
std::vector<Index> nearest_reference_points(std::span<const Location> reference,
                                            std::span<const Location> queries, Index m,
                                            const Metric& metric);

}  // namespace vecchia

#endif  // VECCHIA_GEO_HPP
