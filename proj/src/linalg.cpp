#include "wush/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "wush/error.hpp"
#include "wush/rng.hpp"

namespace wush {

namespace {

void require_square(const Matrix& m, const char* op) {
  if (!m.is_square() || m.rows() == 0) {
    throw Error(Errc::ShapeMismatch, std::string(op) + " needs a non-empty square matrix, got " +
                                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void require_symmetric(const Matrix& m, const char* op) {
  require_square(m, op);
  if (!m.all_finite()) throw Error(Errc::NaNInput, std::string(op) + " input has NaN or Inf entries");
  if (!is_symmetric(m)) throw Error(Errc::NotSymmetric, std::string(op) + " input is not symmetric");
}

// Applies the rotation J(p, q, c, s) as A <- J^T A J and V <- V J.
void rotate(Matrix& a, Matrix& v, std::size_t p, std::size_t q, double c, double s) {
  const std::size_t n = a.rows();
  for (std::size_t k = 0; k < n; ++k) {
    const double akp = a(k, p);
    const double akq = a(k, q);
    a(k, p) = c * akp - s * akq;
    a(k, q) = s * akp + c * akq;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double apk = a(p, k);
    const double aqk = a(q, k);
    a(p, k) = c * apk - s * aqk;
    a(q, k) = s * apk + c * aqk;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

}  // namespace

bool is_symmetric(const Matrix& m, double tol) {
  if (!m.is_square()) return false;
  const double bound = tol * std::max(1.0, m.max_abs());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > bound) return false;
  return true;
}

Matrix symmetrized(const Matrix& m) {
  if (!m.is_square()) throw Error(Errc::ShapeMismatch, "symmetrized needs a square matrix");
  Matrix s = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) s(i, j) = s(j, i) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

CholeskyFactor cholesky(const Matrix& m, double damp) {
  require_symmetric(m, "cholesky");
  if (!(damp >= 0.0)) throw Error(Errc::OutOfRange, "damp must be nonnegative");
  const std::size_t n = m.rows();
  const auto d = m.diag();
  const double shift = damp * std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = m(j, j) + shift;
    for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > 0.0)) {
      throw Error(Errc::NotPositiveDefinite,
                  "pivot " + std::to_string(j) + " is " + std::to_string(pivot) + "; increase damping");
    }
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return {std::move(l)};
}

SymEigen sym_eigen(const Matrix& m) {
  require_symmetric(m, "sym_eigen");
  const std::size_t n = m.rows();
  Matrix a = symmetrized(m);
  Matrix v = Matrix::identity(n);

  auto converged = [&] {
    double off = 0.0;
    double on = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) (i == j ? on : off) += a(i, j) * a(i, j);
    return std::sqrt(off) <= kJacobiTolerance * std::sqrt(on);
  };

  int sweeps = 0;
  while (!converged()) {
    if (sweeps == kJacobiMaxSweeps) {
      throw Error(Errc::NoConvergence, "Jacobi did not converge in " + std::to_string(kJacobiMaxSweeps) + " sweeps");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        rotate(a, v, p, q, c, t * c);
        a(p, q) = a(q, p) = 0.0;
      }
    }
    ++sweeps;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymEigen out{Matrix(n, n), std::vector<double>(n), sweeps};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.eigenvalues[k] = a(src, src);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(v(i, src)) > std::abs(v(arg, src))) arg = i;
    const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = sign * v(i, src);
  }
  return out;
}

bool is_power_of_two(std::size_t d) noexcept { return d != 0 && (d & (d - 1)) == 0; }

Matrix hadamard(std::size_t d) {
  if (!is_power_of_two(d)) throw Error(Errc::NotPowerOfTwo, "hadamard size " + std::to_string(d));
  const double entry = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix h(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      // Sylvester construction: sign is (-1)^popcount(i & j).
      const bool negative = std::popcount(i & j) % 2 == 1;
      h(i, j) = negative ? -entry : entry;
    }
  }
  return h;
}

Matrix random_rotation(std::size_t d, std::uint64_t seed) {
  if (d == 0) throw Error(Errc::ShapeMismatch, "random_rotation needs d >= 1");
  Rng rng(seed);
  Matrix g(d, d);
  for (double& x : g.data()) x = rng.normal();

  Matrix q(d, d);
  std::vector<double> col(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) col[i] = g(i, j);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += q(i, k) * col[i];
        for (std::size_t i = 0; i < d; ++i) col[i] -= dot * q(i, k);
      }
    }
    double norm = 0.0;
    for (double x : col) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw Error(Errc::Singular, "degenerate Gaussian draw in random_rotation");
    for (std::size_t i = 0; i < d; ++i) q(i, j) = col[i] / norm;
  }
  return q;
}

double norm1(const Matrix& m) {
  double best = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) s += std::abs(m(i, j));
    best = std::max(best, s);
  }
  return best;
}

Matrix invert(const Matrix& t) {
  require_square(t, "invert");
  if (!t.all_finite()) throw Error(Errc::NaNInput, "invert input contains NaN or Inf");
  const std::size_t n = t.rows();
  Matrix lu = t;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
    if (lu(piv, k) == 0.0) throw Error(Errc::Singular, "zero pivot at column " + std::to_string(k));
    if (piv != k) {
      std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(piv).begin());
      std::swap(perm[k], perm[piv]);
    }
    const double inv_pivot = 1.0 / lu(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) * inv_pivot;
      lu(i, k) = f;
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
    }
  }

  // Solve L U x = P e_j for every column j.
  Matrix inv(n, n);
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = perm[i] == j ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= lu(i, k) * x[k];
      x[i] = s;
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= lu(ii, k) * x[k];
      x[ii] = s / lu(ii, ii);
    }
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = x[i];
  }

  const double cond = norm1(t) * norm1(inv);
  if (!(cond <= kMaxCondition)) {
    throw Error(Errc::Singular, "condition estimate " + std::to_string(cond) + " exceeds 1e12");
  }
  return inv;
}

Matrix solve_lower(const Matrix& lower, const Matrix& b) {
  require_square(lower, "solve_lower");
  if (b.rows() != lower.rows()) throw Error(Errc::ShapeMismatch, "solve_lower rhs rows");
  const std::size_t n = lower.rows();
  Matrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * x(k, c);
      if (lower(i, i) == 0.0) throw Error(Errc::Singular, "zero diagonal in triangular solve");
      x(i, c) = s / lower(i, i);
    }
  }
  return x;
}

Matrix solve_lower_transposed(const Matrix& lower, const Matrix& b) {
  require_square(lower, "solve_lower_transposed");
  if (b.rows() != lower.rows()) throw Error(Errc::ShapeMismatch, "solve_lower_transposed rhs rows");
  const std::size_t n = lower.rows();
  Matrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = n; i-- > 0;) {
      double s = x(i, c);
      for (std::size_t k = i + 1; k < n; ++k) s -= lower(k, i) * x(k, c);
      if (lower(i, i) == 0.0) throw Error(Errc::Singular, "zero diagonal in triangular solve");
      x(i, c) = s / lower(i, i);
    }
  }
  return x;
}

Matrix random_spd(std::size_t d, std::uint64_t seed, double log10_spread) {
  const Matrix q = random_rotation(d, Rng::derive(seed, 0));
  Rng rng(Rng::derive(seed, 1));
  std::vector<double> lambda(d);
  for (double& l : lambda) l = std::pow(10.0, -log10_spread * rng.uniform());
  Matrix ql = q;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) ql(i, j) *= lambda[j];
  return symmetrized(ql * q.transposed());
}

}  // namespace wush
