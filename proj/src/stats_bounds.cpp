#include "wush/stats_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "wush/error.hpp"
#include "wush/linalg.hpp"
#include "wush/montecarlo.hpp"

namespace wush {

std::string to_string(Family f) { return f == Family::Gaussian ? "gaussian" : "laplacian"; }

Family parse_family(const std::string& name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "laplacian") return Family::Laplacian;
  throw Error(Errc::InvalidSpec, "unknown family '" + name + "' (expected gaussian, laplacian)");
}

namespace {

void check_bound_args(std::size_t d, double max_var) {
  if (d < 1) throw Error(Errc::OutOfRange, "d must be >= 1");
  if (!(max_var > 0.0) || !std::isfinite(max_var)) throw Error(Errc::OutOfRange, "max_var must be positive");
}

// Uniform on the open interval (0, 1).
double open_uniform(Rng& rng) { return (static_cast<double>(rng.next_u64() >> 11) + 0.5) * 0x1.0p-53; }

// P(|Z| > t) = s  =>  t = sqrt(2) erfc^-1(s).
double normal_abs_tail_inverse(double s) { return std::sqrt(2.0) * boost::math::erfc_inv(s); }

// Standard normal quantile at probability p, accurate for small p.
double normal_quantile(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

// 1 - U^(1/k) computed without cancellation.
double one_minus_root(double u, double k) { return -std::expm1(std::log(u) / k); }

// Joint (max, min) of d i.i.d. standard normals: max from its CDF F^d, then the
// minimum of the other d - 1, which are i.i.d. normal truncated above at max.
std::pair<double, double> normal_max_min(std::size_t d, Rng& rng) {
  const double tail = one_minus_root(open_uniform(rng), static_cast<double>(d));
  const double hi = -normal_quantile(tail);
  if (d == 1) return {hi, hi};
  const double f_hi = 1.0 - tail;
  const double f_lo = f_hi * one_minus_root(open_uniform(rng), static_cast<double>(d - 1));
  return {hi, normal_quantile(f_lo)};
}

double equicorrelated_max_sq(std::size_t d, Rng& rng) {
  const double a = std::sqrt(kEquicorrelation) * rng.normal();
  const double c = std::sqrt(1.0 - kEquicorrelation);
  const auto [hi, lo] = normal_max_min(d, rng);
  const double m = std::max(std::abs(a + c * hi), std::abs(a + c * lo));
  return m * m;
}

}  // namespace

double gaussian_max_factor(double d) {
  if (!(d >= 1.0)) throw Error(Errc::OutOfRange, "d must be >= 1");
  return std::min(d, 2.0 * std::log(2.0 * d) + 2.0);
}

double laplacian_max_factor(double d) {
  if (!(d >= 1.0)) throw Error(Errc::OutOfRange, "d must be >= 1");
  const double l = std::log(d);
  return 0.5 * l * l + l + 1.0;
}

double gaussian_max_bound(std::size_t d, double max_var) {
  check_bound_args(d, max_var);
  return gaussian_max_factor(static_cast<double>(d)) * max_var;
}

double laplacian_max_bound(std::size_t d, double max_var) {
  check_bound_args(d, max_var);
  return laplacian_max_factor(static_cast<double>(d)) * max_var;
}

double max_bound(Family f, std::size_t d, double max_var) {
  return f == Family::Gaussian ? gaussian_max_bound(d, max_var) : laplacian_max_bound(d, max_var);
}

MaxSqEstimate mc_max_sq(Family family, std::size_t d, bool correlated, std::size_t n, std::uint64_t seed,
                        std::size_t workers) {
  if (d < 1) throw Error(Errc::OutOfRange, "d must be >= 1");
  const double dd = static_cast<double>(d);
  constexpr double laplace_b = 0.70710678118654752440;  // unit variance
  const MeanEstimate m = chunked_mean(n, seed, workers, [&](Rng& rng) {
    if (!correlated) {
      const double s = one_minus_root(open_uniform(rng), dd);
      const double t = family == Family::Gaussian ? normal_abs_tail_inverse(s) : -laplace_b * std::log(s);
      return t * t;
    }
    if (family == Family::Gaussian) return equicorrelated_max_sq(d, rng);
    const double e = -std::log(open_uniform(rng));
    return e * equicorrelated_max_sq(d, rng);
  });
  MaxSqEstimate r;
  r.empirical = m.mean;
  r.std_error = m.std_error;
  r.n_samples = m.n;
  r.d = d;
  r.family = family;
  r.correlated = correlated;
  r.bound = max_bound(family, d, 1.0);
  return r;
}

MaxSqEstimate mc_max_sq_direct(Family family, const Matrix& covariance, std::size_t n, std::uint64_t seed,
                               std::size_t workers) {
  const std::size_t d = covariance.rows();
  if (!covariance.is_square() || d == 0) throw Error(Errc::InvalidCovariance, "covariance must be square");
  if (!covariance.all_finite() || !is_symmetric(covariance)) {
    throw Error(Errc::InvalidCovariance, "covariance must be finite and symmetric");
  }
  Matrix a;
  try {
    a = cholesky(covariance).lower;
  } catch (const Error&) {
    const SymEigen eig = sym_eigen(covariance);
    const double top = std::max(eig.eigenvalues.front(), 0.0);
    if (eig.eigenvalues.back() < -1e-10 * std::max(top, 1.0)) {
      throw Error(Errc::InvalidCovariance, "covariance is not positive semidefinite");
    }
    a = eig.eigenvectors;
    for (std::size_t j = 0; j < d; ++j) {
      const double r = std::sqrt(std::max(eig.eigenvalues[j], 0.0));
      for (std::size_t i = 0; i < d; ++i) a(i, j) *= r;
    }
  }
  double max_var = 0.0;
  for (std::size_t k = 0; k < d; ++k) max_var = std::max(max_var, covariance(k, k));
  if (!(max_var > 0.0)) throw Error(Errc::InvalidCovariance, "covariance has zero diagonal");

  const MeanEstimate m = chunked_mean(n, seed, workers, [&](Rng& rng) {
    thread_local std::vector<double> z;
    z.resize(d);
    for (double& v : z) v = rng.normal();
    double best = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const auto row = a.row(i);
      double x = 0.0;
      for (std::size_t j = 0; j < d; ++j) x += row[j] * z[j];
      best = std::max(best, x * x);
    }
    return family == Family::Gaussian ? best : -std::log(open_uniform(rng)) * best;
  });
  MaxSqEstimate r;
  r.empirical = m.mean;
  r.std_error = m.std_error;
  r.n_samples = m.n;
  r.d = d;
  r.family = family;
  r.correlated = true;
  r.bound = max_bound(family, d, max_var);
  return r;
}

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int max_depth) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

SurvivalCheck survival_identity_check(double upper) {
  SurvivalCheck c;
  c.integral = adaptive_simpson([](double t) { return 2.0 * t * std::erfc(t / std::sqrt(2.0)); }, 0.0, upper, 1e-12);
  // P(|Z| >= t) <= 2 phi(t) / t, so the dropped tail is at most 4 P(Z >= upper).
  c.tail_bound = 2.0 * std::erfc(upper / std::sqrt(2.0));
  return c;
}

}  // namespace wush
