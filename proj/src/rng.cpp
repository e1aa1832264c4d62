#include "wush/rng.hpp"

#include <cmath>

namespace wush {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

double Rng::laplace_unit_variance() {
  // Laplace(0, b) with 2 b^2 = 1.
  constexpr double b = 0.70710678118654752440;
  const double e = exponential();
  return uniform() < 0.5 ? -b * e : b * e;
}

double Rng::student_t_unit_variance(double dof) {
  std::student_t_distribution<double> t(dof);
  const double x = t(engine_);
  return dof > 2.0 ? x * std::sqrt((dof - 2.0) / dof) : x;
}

}  // namespace wush
