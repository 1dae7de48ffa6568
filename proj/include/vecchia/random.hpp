#ifndef VECCHIA_RANDOM_HPP
#define VECCHIA_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace vecchia {

/// Seeded generator with a fully specified output sequence.
///
/// std::mt19937_64 is pinned by the standard; the distributions in <random>
/// are not, so uniform and normal variates are derived here by hand:
///   uniform(): top 53 bits of one engine draw, scaled to [0, 1)
///   normal():  Box-Muller on u1 in (0, 1], u2 in [0, 1); the sine branch
///              is cached and returned by the following call
///   below(n):  rejection sampling on the top bits, unbiased
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, bound), bound >= 1.
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    int bits = 64;
    while (bits > 1 && ((bound - 1) >> (bits - 1)) == 0) --bits;
    for (;;) {
      const std::uint64_t draw = bits == 64 ? next() : next() >> (64 - bits);
      if (draw < bound) return draw;
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// splitmix64 finalizer; gives independent-looking seeds for separate
/// streams derived from one user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace vecchia

#endif  // VECCHIA_RANDOM_HPP
