#include "vecchia/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>

#include "vecchia/parallel.hpp"
#include "vecchia/random.hpp"

namespace vecchia {

double euclidean_distance(const Location& a, const Location& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

double great_circle_distance(const Location& a, const Location& b, double radius) {
  if (!(radius > 0.0)) throw DomainError("great-circle radius must be positive");
  if (std::abs(a.y) > 90.0 || std::abs(b.y) > 90.0)
    throw DomainError("latitude outside [-90, 90]");
  constexpr double deg = std::numbers::pi / 180.0;
  const double lat1 = a.y * deg;
  const double lat2 = b.y * deg;
  const double dlat = lat2 - lat1;
  const double dlon = (b.x - a.x) * deg;
  auto hav = [](double t) {
    const double s = std::sin(0.5 * t);
    return s * s;
  };
  const double h = std::clamp(hav(dlat) + std::cos(lat1) * std::cos(lat2) * hav(dlon), 0.0, 1.0);
  return 2.0 * radius * std::asin(std::sqrt(h));
}

Metric Metric::great_circle(double radius) {
  if (!(radius > 0.0)) throw DomainError("great-circle radius must be positive");
  return Metric(Kind::great_circle, radius);
}

void Dataset::validate() const {
  if (locations.empty()) throw SizeError("dataset must contain at least one location");
  if (static_cast<Index>(observations.size()) != size())
    throw SizeError("observation count does not match location count");
  for (const auto& loc : locations) {
    if (!std::isfinite(loc.x) || !std::isfinite(loc.y))
      throw DomainError("non-finite coordinate");
    if (metric.kind() == Metric::Kind::great_circle && std::abs(loc.y) > 90.0)
      throw DomainError("latitude outside [-90, 90]");
  }
  if (!observations.allFinite()) throw DomainError("non-finite observation");
}

bool Permutation::is_bijection() const {
  std::vector<bool> seen(order.size(), false);
  for (Index idx : order) {
    if (idx < 0 || idx >= size() || seen[static_cast<std::size_t>(idx)]) return false;
    seen[static_cast<std::size_t>(idx)] = true;
  }
  return true;
}

Permutation Permutation::identity(Index n) {
  Permutation p;
  p.order.resize(static_cast<std::size_t>(n));
  std::iota(p.order.begin(), p.order.end(), Index{0});
  return p;
}

std::vector<Location> Permutation::apply(std::span<const Location> locations) const {
  if (static_cast<Index>(locations.size()) != size())
    throw SizeError("permutation size does not match location count");
  std::vector<Location> out(locations.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = locations[static_cast<std::size_t>(order[k])];
  return out;
}

Eigen::VectorXd Permutation::apply(const Eigen::VectorXd& values) const {
  if (values.size() != size()) throw SizeError("permutation size does not match vector length");
  Eigen::VectorXd out(values.size());
  for (Index k = 0; k < size(); ++k) out[k] = values[order[static_cast<std::size_t>(k)]];
  return out;
}

Dataset Permutation::apply(const Dataset& dataset) const {
  return Dataset{apply(std::span<const Location>(dataset.locations)), apply(dataset.observations),
                 dataset.metric};
}

std::string_view to_string(Ordering ordering) {
  return ordering == Ordering::random ? "random" : "morton";
}

Ordering parse_ordering(std::string_view name) {
  if (name == "random") return Ordering::random;
  if (name == "morton") return Ordering::morton;
  throw LookupError("unknown ordering '" + std::string(name) + "'");
}

Permutation random_ordering(Index n, std::uint64_t seed) {
  if (n < 1) throw SizeError("ordering needs n >= 1");
  Permutation p = Permutation::identity(n);
  Rng rng(seed);
  // Fisher-Yates, high to low.
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(p.order[static_cast<std::size_t>(i)], p.order[static_cast<std::size_t>(j)]);
  }
  return p;
}

std::uint32_t morton_code(std::uint16_t qx, std::uint16_t qy) {
  auto spread = [](std::uint32_t v) {
    v = (v | (v << 8)) & 0x00FF00FFu;
    v = (v | (v << 4)) & 0x0F0F0F0Fu;
    v = (v | (v << 2)) & 0x33333333u;
    v = (v | (v << 1)) & 0x55555555u;
    return v;
  };
  return spread(qx) | (spread(qy) << 1);
}

Permutation morton_ordering(std::span<const Location> locations) {
  const auto n = static_cast<Index>(locations.size());
  if (n < 1) throw SizeError("ordering needs n >= 1");
  double xmin = locations[0].x, xmax = xmin, ymin = locations[0].y, ymax = ymin;
  for (const auto& p : locations) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DomainError("non-finite coordinate");
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  auto quantize = [](double v, double lo, double hi) -> std::uint16_t {
    if (!(hi > lo)) return 0;
    const double t = std::floor((v - lo) / (hi - lo) * 65536.0);
    return static_cast<std::uint16_t>(std::clamp(t, 0.0, 65535.0));
  };
  std::vector<std::uint32_t> codes(locations.size());
  for (std::size_t i = 0; i < codes.size(); ++i)
    codes[i] = morton_code(quantize(locations[i].x, xmin, xmax), quantize(locations[i].y, ymin, ymax));

  Permutation p = Permutation::identity(n);
  std::stable_sort(p.order.begin(), p.order.end(), [&](Index a, Index b) {
    return codes[static_cast<std::size_t>(a)] < codes[static_cast<std::size_t>(b)];
  });
  return p;
}

namespace {

constexpr Index kNeighborChunk = 256;

using Candidate = std::pair<double, Index>;

// Bounded max-heap keeping the k smallest (distance, index) pairs.
class CandidateHeap {
 public:
  void reset(Index k) {
    k_ = k;
    items_.clear();
  }
  bool full() const { return static_cast<Index>(items_.size()) == k_; }
  double worst() const { return items_.front().first; }

  void offer(double d, Index idx) {
    const Candidate c{d, idx};
    if (!full()) {
      items_.push_back(c);
      std::push_heap(items_.begin(), items_.end());
    } else if (c < items_.front()) {
      std::pop_heap(items_.begin(), items_.end());
      items_.back() = c;
      std::push_heap(items_.begin(), items_.end());
    }
  }

  void write_sorted(std::span<Index> out) {
    std::sort_heap(items_.begin(), items_.end());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = items_[k].second;
  }

 private:
  Index k_ = 0;
  std::vector<Candidate> items_;
};

// Uniform bucket grid over a point set. Each cell lists its points in
// increasing index order so a query can stop at an index limit.
class PointGrid {
 public:
  explicit PointGrid(std::span<const Location> points) : points_(points) {
    const auto n = static_cast<Index>(points.size());
    xmin_ = ymin_ = std::numeric_limits<double>::infinity();
    double xmax = -xmin_, ymax = -ymin_;
    for (const auto& p : points) {
      xmin_ = std::min(xmin_, p.x);
      ymin_ = std::min(ymin_, p.y);
      xmax = std::max(xmax, p.x);
      ymax = std::max(ymax, p.y);
    }
    cells_ = std::max<Index>(1, static_cast<Index>(std::ceil(std::sqrt(0.5 * static_cast<double>(n)))));
    wx_ = xmax > xmin_ ? (xmax - xmin_) / static_cast<double>(cells_) : 1.0;
    wy_ = ymax > ymin_ ? (ymax - ymin_) / static_cast<double>(cells_) : 1.0;
    slack_ = 1e-12 * std::max({std::abs(xmin_), std::abs(xmax), std::abs(ymin_), std::abs(ymax),
                               xmax - xmin_, ymax - ymin_, 1e-300});

    start_.assign(static_cast<std::size_t>(cells_ * cells_ + 1), 0);
    std::vector<Index> cell_of(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      cell_of[i] = cell_index(cell_x(points[i].x), cell_y(points[i].y));
      ++start_[static_cast<std::size_t>(cell_of[i] + 1)];
    }
    std::partial_sum(start_.begin(), start_.end(), start_.begin());
    members_.resize(points.size());
    std::vector<Index> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i)
      members_[static_cast<std::size_t>(fill[static_cast<std::size_t>(cell_of[i])]++)] =
          static_cast<Index>(i);
  }

  // k nearest points with index < limit, written to out sorted by
  // (distance, index).
  void query(const Location& q, Index limit, CandidateHeap& heap, std::span<Index> out) const {
    const auto k = static_cast<Index>(out.size());
    heap.reset(k);
    const Index cx = cell_x(q.x);
    const Index cy = cell_y(q.y);
    for (Index r = 0;; ++r) {
      const Index x0 = cx - r, x1 = cx + r, y0 = cy - r, y1 = cy + r;
      for (Index gy = std::max<Index>(y0, 0); gy <= std::min(y1, cells_ - 1); ++gy) {
        if (gy == y0 || gy == y1) {
          for (Index gx = std::max<Index>(x0, 0); gx <= std::min(x1, cells_ - 1); ++gx)
            scan_cell(cell_index(gx, gy), q, limit, heap);
        } else {
          if (x0 >= 0) scan_cell(cell_index(x0, gy), q, limit, heap);
          if (x1 <= cells_ - 1) scan_cell(cell_index(x1, gy), q, limit, heap);
        }
      }
      const bool covers_all = x0 <= 0 && y0 <= 0 && x1 >= cells_ - 1 && y1 >= cells_ - 1;
      if (covers_all) break;
      if (heap.full()) {
        // Any point outside the covered block lies beyond one of its open sides.
        double bound = std::numeric_limits<double>::infinity();
        if (x0 > 0) bound = std::min(bound, q.x - (xmin_ + static_cast<double>(x0) * wx_));
        if (x1 < cells_ - 1) bound = std::min(bound, xmin_ + static_cast<double>(x1 + 1) * wx_ - q.x);
        if (y0 > 0) bound = std::min(bound, q.y - (ymin_ + static_cast<double>(y0) * wy_));
        if (y1 < cells_ - 1) bound = std::min(bound, ymin_ + static_cast<double>(y1 + 1) * wy_ - q.y);
        if (bound - slack_ > heap.worst()) break;
      }
    }
    if (!heap.full()) throw SizeError("fewer candidate points than neighbors requested");
    heap.write_sorted(out);
  }

 private:
  Index cell_x(double x) const {
    return std::clamp<Index>(static_cast<Index>(std::floor((x - xmin_) / wx_)), 0, cells_ - 1);
  }
  Index cell_y(double y) const {
    return std::clamp<Index>(static_cast<Index>(std::floor((y - ymin_) / wy_)), 0, cells_ - 1);
  }
  Index cell_index(Index gx, Index gy) const { return gy * cells_ + gx; }

  void scan_cell(Index cell, const Location& q, Index limit, CandidateHeap& heap) const {
    const Index* it = members_.data() + start_[static_cast<std::size_t>(cell)];
    const Index* end = members_.data() + start_[static_cast<std::size_t>(cell + 1)];
    for (; it != end && *it < limit; ++it)
      heap.offer(euclidean_distance(q, points_[static_cast<std::size_t>(*it)]), *it);
  }

  std::span<const Location> points_;
  double xmin_ = 0.0, ymin_ = 0.0, wx_ = 1.0, wy_ = 1.0, slack_ = 0.0;
  Index cells_ = 1;
  std::vector<Index> start_;
  std::vector<Index> members_;
};

void check_neighbor_sizes(Index n, Index m) {
  if (m < 1) throw SizeError("conditioning size m must be >= 1");
  if (n <= m)
    throw SizeError("need n > m (n = " + std::to_string(n) + ", m = " + std::to_string(m) + ")");
}

}  // namespace

NeighborTable nearest_neighbors_bruteforce(std::span<const Location> ordered, Index m,
                                           const Metric& metric) {
  const auto n = static_cast<Index>(ordered.size());
  check_neighbor_sizes(n, m);
  NeighborTable table(n, m);
  parallel_for(n - m, kNeighborChunk, [&](Index begin, Index end) {
    CandidateHeap heap;
    for (Index i = m + begin; i < m + end; ++i) {
      heap.reset(m);
      const auto& target = ordered[static_cast<std::size_t>(i)];
      for (Index j = 0; j < i; ++j) heap.offer(metric(target, ordered[static_cast<std::size_t>(j)]), j);
      heap.write_sorted(table[i]);
    }
  });
  return table;
}

NeighborTable nearest_neighbors(std::span<const Location> ordered, Index m, const Metric& metric) {
  if (metric.kind() != Metric::Kind::euclidean) return nearest_neighbors_bruteforce(ordered, m, metric);
  const auto n = static_cast<Index>(ordered.size());
  check_neighbor_sizes(n, m);
  const PointGrid grid(ordered);
  NeighborTable table(n, m);
  parallel_for(n - m, kNeighborChunk, [&](Index begin, Index end) {
    CandidateHeap heap;
    for (Index i = m + begin; i < m + end; ++i)
      grid.query(ordered[static_cast<std::size_t>(i)], i, heap, table[i]);
  });
  return table;
}

NeighborTable nearest_neighbors(const Dataset& ordered, Index m) {
  return nearest_neighbors(ordered.locations, m, ordered.metric);
}

std::vector<Index> nearest_reference_points(std::span<const Location> reference,
                                            std::span<const Location> queries, Index m,
                                            const Metric& metric) {
  const auto n = static_cast<Index>(reference.size());
  if (m < 1 || m > n) throw SizeError("need 1 <= m <= number of reference points");
  std::vector<Index> out(queries.size() * static_cast<std::size_t>(m));
  auto row = [&](Index q) { return std::span<Index>(out.data() + q * m, static_cast<std::size_t>(m)); };
  const auto nq = static_cast<Index>(queries.size());

  if (metric.kind() == Metric::Kind::euclidean) {
    const PointGrid grid(reference);
    parallel_for(nq, kNeighborChunk, [&](Index begin, Index end) {
      CandidateHeap heap;
      for (Index q = begin; q < end; ++q) grid.query(queries[static_cast<std::size_t>(q)], n, heap, row(q));
    });
  } else {
    parallel_for(nq, kNeighborChunk, [&](Index begin, Index end) {
      CandidateHeap heap;
      for (Index q = begin; q < end; ++q) {
        heap.reset(m);
        for (Index j = 0; j < n; ++j)
          heap.offer(metric(queries[static_cast<std::size_t>(q)], reference[static_cast<std::size_t>(j)]), j);
        heap.write_sorted(row(q));
      }
    });
  }
  return out;
}

}  // namespace vecchia
