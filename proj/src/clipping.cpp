#include <cmath>

#include "wush/error.hpp"
#include "wush/quant.hpp"

namespace wush {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
double cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Integral of (x - r)^2 phi(x) over [a, b].
double cell_error(double a, double b, double r) {
  const double p = cdf(b) - cdf(a);
  const double m1 = pdf(a) - pdf(b);
  const double m2 = p + a * pdf(a) - b * pdf(b);
  return m2 - 2.0 * r * m1 + r * r * p;
}

// Twice the squared error integral over [0, m] for scale s and `levels` positive levels.
double truncated_error(double m, double s, int levels) {
  double total = 0.0;
  for (int k = 0; k <= levels; ++k) {
    const double lo = k == 0 ? 0.0 : (k - 0.5) * s;
    const double hi = k == levels ? m : std::min(m, (k + 0.5) * s);
    if (hi <= lo) break;
    total += cell_error(lo, hi, k * s);
  }
  return 2.0 * total;
}

}  // namespace

double gaussian_group_mse(int bits, int group_size, double clip) {
  if (bits < 2 || group_size < 2 || !(clip > 0.0 && clip <= 1.0)) {
    throw Error(Errc::OutOfRange, "gaussian_group_mse arguments out of range");
  }
  const int levels = (1 << (bits - 1)) - 1;
  const double d = group_size;
  // The AbsMax element clamps to clip * m; the other d - 1 elements are
  // Gaussian truncated to [-m, m]. Outer integral over the absmax density
  // f(m) = 2 d phi(m) (2 Phi(m) - 1)^(d - 1), composite Simpson on [0, 12].
  auto integrand = [&](double m) {
    if (m <= 0.0) return 0.0;
    const double within = 2.0 * cdf(m) - 1.0;
    const double s = clip * m / levels;
    const double top = 2.0 * d * pdf(m) * std::pow(within, d - 1.0) * (1.0 - clip) * (1.0 - clip) * m * m;
    const double rest = (d - 1.0) * 2.0 * d * pdf(m) * std::pow(within, d - 2.0) * truncated_error(m, s, levels);
    return top + rest;
  };
  constexpr int kIntervals = 2400;
  constexpr double kUpper = 12.0;
  const double h = kUpper / kIntervals;
  double sum = integrand(0.0) + integrand(kUpper);
  for (int i = 1; i < kIntervals; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * integrand(i * h);
  return sum * h / 3.0 / d;
}

double gaussian_mse_clip(int bits, int group_size) {
  auto search = [&](double lo, double hi, double step) {
    double best = hi;
    double best_mse = gaussian_group_mse(bits, group_size, hi);
    for (double c = lo; c < hi; c += step) {
      const double mse = gaussian_group_mse(bits, group_size, c);
      if (mse < best_mse) {
        best_mse = mse;
        best = c;
      }
    }
    return best;
  };
  const double coarse = search(0.30, 1.0, 1e-2);
  const double fine = search(std::max(0.30, coarse - 1e-2), std::min(1.0, coarse + 1e-2), 1e-3);
  return search(std::max(0.30, fine - 1e-3), std::min(1.0, fine + 1e-3), 1e-5);
}

}  // namespace wush
