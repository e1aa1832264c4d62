#include "wush/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wush/error.hpp"
#include "wush/linalg.hpp"
#include "wush/montecarlo.hpp"

namespace wush {

NoiseModel::NoiseModel(FpRelative m) : kind_(m) {
  if (m.value_mant_bits < 0 || m.scale_mant_bits < 0) throw Error(Errc::OutOfRange, "mantissa bits must be >= 0");
}

NoiseModel::NoiseModel(IntAbsmax m) : kind_(m) {
  if (m.bits < 1) throw Error(Errc::OutOfRange, "integer bits must be >= 1");
}

double NoiseModel::second_moment() const {
  constexpr double ln2 = std::numbers::ln2;
  if (const auto* f = std::get_if<FpRelative>(&kind_)) {
    const double u = ln2 * ln2 * std::ldexp(1.0, -2 * f->value_mant_bits) / 12.0;
    const double v = ln2 * ln2 * std::ldexp(1.0, -2 * f->scale_mant_bits) / 12.0;
    return u + v + u * v;
  }
  const auto& i = std::get<IntAbsmax>(kind_);
  return std::ldexp(1.0, 2 - 2 * i.bits) / 12.0;
}

double NoiseModel::sample(Rng& rng) const {
  constexpr double ln2 = std::numbers::ln2;
  if (const auto* f = std::get_if<FpRelative>(&kind_)) {
    const double u = ln2 * std::ldexp(1.0, -f->value_mant_bits) * (rng.uniform() - 0.5);
    const double v = ln2 * std::ldexp(1.0, -f->scale_mant_bits) * (rng.uniform() - 0.5);
    return (1.0 + u) * (1.0 + v) - 1.0;
  }
  const auto& i = std::get<IntAbsmax>(kind_);
  return std::ldexp(1.0, 1 - i.bits) * (rng.uniform() - 0.5);
}

std::string NoiseModel::describe() const {
  if (const auto* f = std::get_if<FpRelative>(&kind_)) {
    return "fp(b=" + std::to_string(f->value_mant_bits) + ",b_scale=" + std::to_string(f->scale_mant_bits) + ")";
  }
  return "int(b=" + std::to_string(std::get<IntAbsmax>(kind_).bits) + ")";
}

Matrix moment_factor(const Matrix& moment) {
  if (!moment.is_square()) throw Error(Errc::ShapeMismatch, "moment must be square");
  if (!is_symmetric(moment)) throw Error(Errc::NotSymmetric, "moment must be symmetric");
  try {
    return cholesky(moment).lower;
  } catch (const Error& e) {
    if (e.code() != Errc::NotPositiveDefinite) throw;
  }
  const SymEigen eig = sym_eigen(moment);
  const double top = std::max(eig.eigenvalues.front(), 0.0);
  Matrix a = eig.eigenvectors;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const double l = eig.eigenvalues[j];
    if (l < -1e-10 * std::max(top, 1.0)) throw Error(Errc::InvalidCovariance, "moment is not positive semidefinite");
    const double r = std::sqrt(std::max(l, 0.0));
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, j) *= r;
  }
  return a;
}

namespace {

LossEstimate to_loss(const MeanEstimate& m) { return {m.mean, m.std_error, m.n}; }

void fill(std::vector<double>& z, Rng& rng, SampleFamily family) {
  if (family == SampleFamily::Gaussian) {
    for (double& v : z) v = rng.normal();
  } else {
    for (double& v : z) v = rng.laplace_unit_variance();
  }
}

void matvec(const Matrix& a, const std::vector<double>& x, std::vector<double>& out) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
    out[i] = s;
  }
}

void check_square(const Matrix& t, const Matrix& moment) {
  if (!t.is_square() || !moment.is_square() || t.rows() != moment.rows()) {
    throw Error(Errc::ShapeMismatch, "transform and moment must be matching square matrices");
  }
}

}  // namespace

LossEstimate one_sided_loss_mc(const Matrix& t, const Matrix& moment, const NoiseModel& model, std::size_t n,
                               std::uint64_t seed, SampleFamily family, std::size_t workers) {
  check_square(t, moment);
  const std::size_t d = t.rows();
  const Matrix t_inv = invert(t);
  const Matrix b = t * moment_factor(moment);
  return to_loss(chunked_mean(n, seed, workers, [&, d](Rng& rng) {
    thread_local std::vector<double> z, ty, e, out;
    z.resize(d);
    ty.resize(d);
    e.resize(d);
    out.resize(d);
    fill(z, rng, family);
    matvec(b, z, ty);
    if (model.is_fp()) {
      for (std::size_t k = 0; k < d; ++k) e[k] = model.sample(rng) * ty[k];
    } else {
      double inf = 0.0;
      for (double v : ty) inf = std::max(inf, std::abs(v));
      for (std::size_t k = 0; k < d; ++k) e[k] = inf * model.sample(rng);
    }
    matvec(t_inv, e, out);
    double sq = 0.0;
    for (double v : out) sq += v * v;
    return sq;
  }));
}

LossEstimate expected_inf_norm_sq_mc(const Matrix& t, const Matrix& moment, std::size_t n, std::uint64_t seed,
                                     SampleFamily family, std::size_t workers) {
  check_square(t, moment);
  const std::size_t d = t.rows();
  const Matrix b = t * moment_factor(moment);
  return to_loss(chunked_mean(n, seed, workers, [&, d](Rng& rng) {
    thread_local std::vector<double> z, ty;
    z.resize(d);
    ty.resize(d);
    fill(z, rng, family);
    matvec(b, z, ty);
    double inf = 0.0;
    for (double v : ty) inf = std::max(inf, std::abs(v));
    return inf * inf;
  }));
}

LossEstimate eta_second_moment_mc(const NoiseModel& model, std::size_t n, std::uint64_t seed) {
  return to_loss(chunked_mean(n, seed, 1, [&](Rng& rng) {
    const double v = model.sample(rng);
    return v * v;
  }));
}

LossEstimate eta_mean_mc(const NoiseModel& model, std::size_t n, std::uint64_t seed) {
  return to_loss(chunked_mean(n, seed, 1, [&](Rng& rng) { return model.sample(rng); }));
}

namespace {

void check_params(const TraceParams& p, std::span<const double> s) {
  const std::size_t d = s.size();
  if (p.u_prime.rows() != d || p.u_prime.cols() != d || p.r.rows() != d || p.r.cols() != d ||
      p.s_prime.size() != d) {
    throw Error(Errc::ShapeMismatch, "trace parameters must all have dimension d");
  }
  for (std::size_t k = 0; k < d; ++k) {
    if (!(s[k] > 0.0) || !(p.s_prime[k] > 0.0)) throw Error(Errc::OutOfRange, "S and S' must be positive");
  }
}

}  // namespace

Matrix transform_from_params(const TraceParams& p, std::span<const double> s) {
  check_params(p, s);
  const std::size_t d = s.size();
  Matrix t = p.r.transposed();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) t(i, j) *= p.s_prime[i] / s[j];
  return p.u_prime * t;
}

double fp_trace_term(const TraceParams& p, std::span<const double> s) {
  check_params(p, s);
  const std::size_t d = s.size();
  // Column k of U'^T is row k of U'.
  const Matrix ut = p.u_prime.transposed();
  double total = 0.0;
  std::vector<double> a(d), b(d);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      a[i] = ut(i, k) / p.s_prime[i];
      b[i] = ut(i, k) * p.s_prime[i];
    }
    double left = 0.0;
    double right = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double ra = 0.0;
      double rb = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        ra += p.r(i, j) * a[j];
        rb += p.r(i, j) * b[j];
      }
      left += s[i] * s[i] * ra * ra;
      right += rb * rb;
    }
    total += left * right;
  }
  return total;
}

double trace_term_direct(const Matrix& t, const Matrix& moment) {
  check_square(t, moment);
  const Matrix t_inv = invert(t);
  const Matrix conj = t * moment * t.transposed();
  double total = 0.0;
  for (std::size_t k = 0; k < t.rows(); ++k) {
    double col = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) col += t_inv(i, k) * t_inv(i, k);
    total += conj(k, k) * col;
  }
  return total;
}

IntBounds int_bounds(std::span<const double> s, std::span<const double> s_prime) {
  if (s.size() != s_prime.size() || s.empty()) throw Error(Errc::ShapeMismatch, "S and S' must have equal size");
  double a = 0.0;
  double b = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!(s[k] > 0.0) || !(s_prime[k] > 0.0)) throw Error(Errc::OutOfRange, "S and S' must be positive");
    a += (s[k] * s[k]) / (s_prime[k] * s_prime[k]);
    b += s_prime[k] * s_prime[k];
  }
  const double upper = a * b;
  return {upper / static_cast<double>(s.size()), upper};
}

double midrise_int_quantizer(double x, double s, int bits) {
  if (!std::isfinite(x) || !std::isfinite(s)) throw Error(Errc::NaNInput, "midrise quantizer input not finite");
  if (s == 0.0) throw Error(Errc::OutOfRange, "midrise scale must be nonzero");
  if (bits < 1) throw Error(Errc::OutOfRange, "midrise bits must be >= 1");
  const double u = x / s;
  const double half = std::ldexp(1.0, bits - 1);
  if (u < -half || u >= half) throw Error(Errc::OutOfRange, "midrise input outside [-2^(b-1), 2^(b-1)) s");
  return (std::floor(u) + 0.5) * s;
}

}  // namespace wush
