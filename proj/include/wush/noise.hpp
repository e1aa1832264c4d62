#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "wush/matrix.hpp"
#include "wush/parallel.hpp"
#include "wush/rng.hpp"

namespace wush {

// Multiplicative FP error: eps(a) = diag(eta) a with
// eta = (1 + ln2 2^-b xi)(1 + ln2 2^-bs xs) - 1 and xi, xs ~ U(-1/2, 1/2).
struct FpRelative {
  int value_mant_bits = 1;
  int scale_mant_bits = 0;
};

// AbsMax INT error: eps(a) = ||a||_inf eta with i.i.d. eta_k = 2^(1-b) xi_k.
struct IntAbsmax {
  int bits = 4;
};

class NoiseModel {
 public:
  NoiseModel(FpRelative m);
  NoiseModel(IntAbsmax m);

  static NoiseModel fp(int value_mant_bits, int scale_mant_bits) { return FpRelative{value_mant_bits, scale_mant_bits}; }
  static NoiseModel integer(int bits) { return IntAbsmax{bits}; }

  bool is_fp() const noexcept { return std::holds_alternative<FpRelative>(kind_); }
  const std::variant<FpRelative, IntAbsmax>& kind() const noexcept { return kind_; }

  // Closed-form E[eta^2].
  double second_moment() const;
  double sample(Rng& rng) const;
  std::string describe() const;

 private:
  std::variant<FpRelative, IntAbsmax> kind_;
};

inline double sample_eta(const NoiseModel& model, Rng& rng) { return model.sample(rng); }

struct LossEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
};

enum class SampleFamily { Gaussian, Laplacian };

// y = A z with A A^T = moment (Cholesky, eigen square root when only PSD) and
// z i.i.d. standard normal or unit-variance Laplacian.
Matrix moment_factor(const Matrix& moment);

// E || T^-1 eps(T y) ||^2 for y with the given second moment.
LossEstimate one_sided_loss_mc(const Matrix& t, const Matrix& moment, const NoiseModel& model, std::size_t n,
                               std::uint64_t seed, SampleFamily family = SampleFamily::Gaussian,
                               std::size_t workers = default_workers());

// E || T y ||_inf^2.
LossEstimate expected_inf_norm_sq_mc(const Matrix& t, const Matrix& moment, std::size_t n, std::uint64_t seed,
                                     SampleFamily family = SampleFamily::Gaussian,
                                     std::size_t workers = default_workers());

// E[eta^2] by sampling, for checking the closed form.
LossEstimate eta_second_moment_mc(const NoiseModel& model, std::size_t n, std::uint64_t seed);
LossEstimate eta_mean_mc(const NoiseModel& model, std::size_t n, std::uint64_t seed);

// T = U' S' R^T S^-1 acting on y with second moment S^2, so that
// T^-1 = S R S'^-1 U'^T and T S^2 T^T = U' S'^2 U'^T.
struct TraceParams {
  Matrix u_prime;
  std::vector<double> s_prime;
  Matrix r;
};

Matrix transform_from_params(const TraceParams& p, std::span<const double> s);

// sum_k ||S R S'^-1 U'^T e_k||^2 ||R S' U'^T e_k||^2.
double fp_trace_term(const TraceParams& p, std::span<const double> s);
// tr(T^-1 ((T M T^T) o I) T^-T) for a general transform and y-moment M.
double trace_term_direct(const Matrix& t, const Matrix& moment);

struct IntBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// lower = tr(S^2 S'^-2) tr(S'^2) / d, upper = d * lower.
IntBounds int_bounds(std::span<const double> s, std::span<const double> s_prime);

// (floor(x / s) + 1/2) s; x / s must lie in [-2^(b-1), 2^(b-1)).
double midrise_int_quantizer(double x, double s, int bits = 4);

}  // namespace wush
