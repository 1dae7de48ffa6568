#include "vecchia/kernels.hpp"

#include <array>
#include <cmath>
#include <string>

namespace vecchia {

std::string_view to_string(KernelFamily family) {
  return family == KernelFamily::matern ? "matern" : "powexp";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "matern") return KernelFamily::matern;
  if (name == "powexp") return KernelFamily::power_exponential;
  throw LookupError("unknown kernel family '" + std::string(name) + "'");
}

double bessel_kv(double nu, double x) {
  if (!(x > 0.0)) throw DomainError("bessel_kv requires x > 0");
  if (!std::isfinite(nu)) throw DomainError("bessel_kv requires finite order");
  // K_{-nu} = K_nu
  return std::cyl_bessel_k(std::abs(nu), x);
}

namespace {

struct RangeEntry {
  double effective_range;
  double nu;
  double beta;
};

constexpr std::array<RangeEntry, 9> kRangeTable{{
    {0.1, 0.5, 0.026270}, {0.1, 1.5, 0.017512}, {0.1, 2.5, 0.014290},
    {0.3, 0.5, 0.078809}, {0.3, 1.5, 0.052537}, {0.3, 2.5, 0.014290},
    {0.8, 0.5, 0.210158}, {0.8, 1.5, 0.140098}, {0.8, 2.5, 0.114318},
}};

}  // namespace

double beta_from_effective_range(double effective_range, double nu) {
  for (const auto& e : kRangeTable) {
    if (std::abs(e.effective_range - effective_range) < 1e-12 && std::abs(e.nu - nu) < 1e-12)
      return e.beta;
  }
  throw LookupError("no tabulated beta for effective range " + std::to_string(effective_range) +
                    " and nu " + std::to_string(nu));
}

}  // namespace vecchia
