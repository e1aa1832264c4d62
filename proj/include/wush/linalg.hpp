#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "wush/matrix.hpp"

namespace wush {

struct SymEigen {
  Matrix eigenvectors;              // orthogonal; column k pairs with eigenvalues[k]
  std::vector<double> eigenvalues;  // non-increasing
  int sweeps = 0;                   // Jacobi sweeps performed (0 for diagonal input)
};

struct CholeskyFactor {
  Matrix lower;
};

// Symmetry tolerance shared by the factorizations: |m_ij - m_ji| <= 1e-8 * max(1, max|m|).
constexpr double kSymmetryTolerance = 1e-8;
bool is_symmetric(const Matrix& m, double tol = kSymmetryTolerance);
Matrix symmetrized(const Matrix& m);

// L with L L^T = m + damp * mean(diag(m)) * I. Damping is relative, as with
// GPTQ's percdamp. Throws NotPositiveDefinite on a non-positive pivot.
CholeskyFactor cholesky(const Matrix& m, double damp = 0.0);

// Cyclic Jacobi. Converged when the off-diagonal Frobenius norm is at most
// 1e-12 of the diagonal Frobenius norm; at most 64 sweeps.
// Eigenvalues are sorted descending with ties kept in original index order, and
// each eigenvector column is signed so its largest-magnitude entry is positive.
// Exactly diagonal input is returned without any rotation.
SymEigen sym_eigen(const Matrix& m);

constexpr int kJacobiMaxSweeps = 64;
constexpr double kJacobiTolerance = 1e-12;

// Normalized Sylvester Hadamard matrix, entries +-1/sqrt(d).
Matrix hadamard(std::size_t d);
bool is_power_of_two(std::size_t d) noexcept;

// Haar-distributed orthogonal matrix: Gaussian fill, Gram-Schmidt with one
// re-orthogonalization pass. Gram-Schmidt yields a positive R diagonal, which is
// the sign normalization that makes Q Haar.
Matrix random_rotation(std::size_t d, std::uint64_t seed);

// LU with partial pivoting. Throws Singular on a zero pivot or when the
// 1-norm condition estimate ||t||_1 ||t^-1||_1 exceeds 1e12.
Matrix invert(const Matrix& t);
constexpr double kMaxCondition = 1e12;

double norm1(const Matrix& m);

// Solves L x = b for lower-triangular L (forward substitution), column by column.
Matrix solve_lower(const Matrix& lower, const Matrix& b);
// Solves L^T x = b for lower-triangular L (back substitution on the transpose).
Matrix solve_lower_transposed(const Matrix& lower, const Matrix& b);

// Q diag(lambda) Q^T with Q = random_rotation(d, seed) and eigenvalues
// log-uniform in [10^-log10_spread, 1]. Test and validation fixture.
Matrix random_spd(std::size_t d, std::uint64_t seed, double log10_spread = 2.0);

}  // namespace wush
