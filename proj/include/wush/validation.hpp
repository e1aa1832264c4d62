#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "wush/matrix.hpp"
#include "wush/noise.hpp"
#include "wush/parallel.hpp"

namespace wush {

// A random moment pair (M_W, M_X) reduced to one-sided form: y = W'^T x has
// second moment W'^T M_X W' = U S^2 U^T, and the WUSH activation transform acts
// on y as T = t_act W'^-T = H S^-1/2 U^T.
struct ReducedInstance {
  std::size_t d = 0;
  Matrix m_w;
  Matrix m_x;
  Matrix y_moment;
  Matrix t_opt;
  std::vector<double> s;  // singular values, descending
  double trace_s = 0.0;
  double trace_s2 = 0.0;
};

// M_W and M_X are random_spd(d, .) drawn from seeds derived from `seed`.
ReducedInstance reduced_instance(std::size_t d, std::uint64_t seed);

struct FpValidation {
  LossEstimate loss;       // Monte Carlo one-sided loss at T = t_opt
  double lower_bound = 0;  // E[eta^2] (tr S)^2 / d
  double orthogonal = 0;   // E[eta^2] tr(S^2), the loss of any orthogonal T
  double ratio = 0;        // loss.mean / lower_bound
};

FpValidation validate_fp_instance(const ReducedInstance& inst, const NoiseModel& model, std::size_t n,
                                  std::uint64_t seed, std::size_t workers = default_workers());

struct IntValidation {
  LossEstimate loss;       // Monte Carlo one-sided loss at T = t_opt
  double normalized = 0;   // loss.mean / E[eta^2]
  double lower = 0;        // (tr S)^2 / d
  double upper = 0;        // (tr S)^2
  double gaussian = 0;     // (2 ln(2d) + 2) (tr S)^2 / d
  bool within() const noexcept { return normalized >= lower && normalized <= upper; }
};

IntValidation validate_int_instance(const ReducedInstance& inst, const NoiseModel& model, std::size_t n,
                                    std::uint64_t seed, std::size_t workers = default_workers());

}  // namespace wush
