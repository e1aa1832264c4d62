#include "wush/validation.hpp"

#include <cmath>

#include "wush/error.hpp"
#include "wush/linalg.hpp"
#include "wush/transforms.hpp"

namespace wush {

ReducedInstance reduced_instance(std::size_t d, std::uint64_t seed) {
  ReducedInstance r;
  r.d = d;
  r.m_w = random_spd(d, Rng::derive(seed, 0));
  r.m_x = random_spd(d, Rng::derive(seed, 1));
  const BlockTransform b = build_block(TransformKind::Wush, r.m_w, r.m_x);
  r.y_moment = symmetrized(transpose_times(b.w_factor, r.m_x * b.w_factor));
  // T = t_act W'^-T, i.e. T^T = W'^-1 t_act^T.
  r.t_opt = solve_lower(b.w_factor, b.t_act.transposed()).transposed();
  r.s.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    r.s[k] = std::sqrt(b.eigenvalues[k]);
    r.trace_s += r.s[k];
    r.trace_s2 += b.eigenvalues[k];
  }
  return r;
}

FpValidation validate_fp_instance(const ReducedInstance& inst, const NoiseModel& model, std::size_t n,
                                  std::uint64_t seed, std::size_t workers) {
  if (!model.is_fp()) throw Error(Errc::InvalidSpec, "FP validation needs an FP noise model");
  FpValidation v;
  v.loss = one_sided_loss_mc(inst.t_opt, inst.y_moment, model, n, seed, SampleFamily::Gaussian, workers);
  const double e2 = model.second_moment();
  v.lower_bound = e2 * inst.trace_s * inst.trace_s / static_cast<double>(inst.d);
  v.orthogonal = e2 * inst.trace_s2;
  v.ratio = v.loss.mean / v.lower_bound;
  return v;
}

IntValidation validate_int_instance(const ReducedInstance& inst, const NoiseModel& model, std::size_t n,
                                    std::uint64_t seed, std::size_t workers) {
  if (model.is_fp()) throw Error(Errc::InvalidSpec, "INT validation needs an INT noise model");
  IntValidation v;
  v.loss = one_sided_loss_mc(inst.t_opt, inst.y_moment, model, n, seed, SampleFamily::Gaussian, workers);
  const double dd = static_cast<double>(inst.d);
  v.normalized = v.loss.mean / model.second_moment();
  v.upper = inst.trace_s * inst.trace_s;
  v.lower = v.upper / dd;
  v.gaussian = (2.0 * std::log(2.0 * dd) + 2.0) * v.lower;
  return v;
}

}  // namespace wush
