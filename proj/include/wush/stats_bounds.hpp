#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "wush/matrix.hpp"
#include "wush/parallel.hpp"

namespace wush {

enum class Family { Gaussian, Laplacian };

std::string to_string(Family f);
Family parse_family(const std::string& name);

// Bound factors as functions of a real dimension d >= 1.
double gaussian_max_factor(double d);
double laplacian_max_factor(double d);

// min{d, 2 ln(2d) + 2} * max_var.
double gaussian_max_bound(std::size_t d, double max_var);
// (ln(d)^2 / 2 + ln d + 1) * max_var.
double laplacian_max_bound(std::size_t d, double max_var);
double max_bound(Family f, std::size_t d, double max_var);

struct MaxSqEstimate {
  double empirical = 0.0;  // Monte Carlo E max_k X_k^2
  double std_error = 0.0;
  double bound = 0.0;
  std::size_t d = 0;
  std::size_t n_samples = 0;
  Family family = Family::Gaussian;
  bool correlated = false;

  // empirical + 3 SE <= bound. At d = 1 the bound is E X^2 itself, so there the
  // check is agreement within 3 SE.
  bool holds() const noexcept {
    if (d == 1) return std::abs(empirical - bound) <= 3.0 * std_error;
    return empirical + 3.0 * std_error <= bound;
  }
};

// Equicorrelation used by the correlated probes.
constexpr double kEquicorrelation = 0.5;

// Unit marginal variances. i.i.d. case: exact sampling of max |X_k| by inverse
// CDF. Correlated Gaussian: X = sqrt(rho) G0 + sqrt(1 - rho) G with the exact
// joint (max, min) of the d i.i.d. G_k. Correlated Laplacian: common-factor
// mixture X = sqrt(E) Z, E ~ Exp(1) shared, Z equicorrelated Gaussian, which has
// unit-variance Laplacian marginals.
MaxSqEstimate mc_max_sq(Family family, std::size_t d, bool correlated, std::size_t n, std::uint64_t seed,
                        std::size_t workers = default_workers());

// Direct sampler for an arbitrary covariance: X = A z with A A^T = covariance and
// z i.i.d. standard normal (Gaussian) or X = sqrt(E) A z (Laplacian mixture).
// Throws InvalidCovariance for a non-symmetric or indefinite covariance.
MaxSqEstimate mc_max_sq_direct(Family family, const Matrix& covariance, std::size_t n, std::uint64_t seed,
                               std::size_t workers = default_workers());

// Adaptive Simpson quadrature with absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-10,
                        int max_depth = 50);

// int_0^upper 2t P(|Z| >= t) dt for standard normal Z (equals E Z^2 = 1 as upper -> inf),
// with the analytic tail bound of the truncated part.
struct SurvivalCheck {
  double integral = 0.0;
  double tail_bound = 0.0;
};
SurvivalCheck survival_identity_check(double upper = 12.0);

}  // namespace wush
