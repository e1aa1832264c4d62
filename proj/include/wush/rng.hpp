#pragma once

#include <cstdint>
#include <random>

namespace wush {

// Seeded random stream. Every randomized routine in the library takes a seed and
// builds its own Rng; parallel work derives one substream per chunk so results
// never depend on scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for (seed, index). Used for per-block, per-chunk and
  // per-sub-column randomness.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) noexcept;
  static Rng substream(std::uint64_t seed, std::uint64_t index) { return Rng(derive(seed, index)); }

  double uniform() { return unit_(engine_); }                // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  double exponential() { return exponential_(engine_); }     // rate 1
  double laplace_unit_variance();
  double student_t_unit_variance(double dof);
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::exponential_distribution<double> exponential_{1.0};
};

}  // namespace wush
