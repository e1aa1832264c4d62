#include "wush/transforms.hpp"

#include <algorithm>
#include <cmath>

#include "wush/error.hpp"
#include "wush/linalg.hpp"

namespace wush {

std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::Identity: return "i";
    case TransformKind::Random: return "r";
    case TransformKind::Hadamard: return "h";
    case TransformKind::Wus: return "wus";
    case TransformKind::Wush: return "wush";
  }
  return "?";
}

TransformKind parse_transform_kind(std::string_view name) {
  for (TransformKind k : all_transform_kinds()) {
    if (name == to_string(k)) return k;
  }
  throw Error(Errc::InvalidSpec, "unknown transform '" + std::string(name) + "' (expected i, r, h, wus, wush)");
}

const std::vector<TransformKind>& all_transform_kinds() {
  static const std::vector<TransformKind> kinds = {TransformKind::Identity, TransformKind::Random,
                                                   TransformKind::Hadamard, TransformKind::Wus,
                                                   TransformKind::Wush};
  return kinds;
}

namespace {

void add_relative_damping(Matrix& m, double damp) {
  if (damp == 0.0) return;
  const std::size_t n = m.rows();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += m(i, i);
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) += damp * mean;
}

}  // namespace

MomentPair second_moments(const Matrix& w, const Matrix& x, double damp) {
  if (w.rows() != x.rows() || w.empty() || x.empty()) {
    throw Error(Errc::ShapeMismatch, "w and x must share d_in rows");
  }
  if (!(damp >= 0.0) || !std::isfinite(damp)) throw Error(Errc::OutOfRange, "damp must be a finite value >= 0");
  MomentPair p;
  p.damp = damp;
  p.m_x = gram(x, static_cast<double>(x.cols()));
  p.m_w = gram(w, static_cast<double>(w.cols()));
  add_relative_damping(p.m_x, damp);
  add_relative_damping(p.m_w, damp);
  return p;
}

BlockTransform build_block(TransformKind kind, const Matrix& m_w_block, const Matrix& m_x_block, std::uint64_t seed,
                           std::size_t block_index) {
  const std::size_t d = m_x_block.rows();
  if (!m_x_block.is_square() || !m_w_block.is_square() || m_w_block.rows() != d) {
    throw Error(Errc::ShapeMismatch, "moment blocks must be matching square matrices");
  }
  if (!is_power_of_two(d)) throw Error(Errc::NotPowerOfTwo, "block size " + std::to_string(d));
  if (!is_symmetric(m_x_block) || !is_symmetric(m_w_block)) {
    throw Error(Errc::NotSymmetric, "moment blocks must be symmetric");
  }

  BlockTransform b;
  b.kind = kind;
  b.block_index = block_index;
  b.seed = seed;
  switch (kind) {
    case TransformKind::Identity:
      b.t_act = Matrix::identity(d);
      break;
    case TransformKind::Random:
      b.t_act = random_rotation(d, seed);
      break;
    case TransformKind::Hadamard:
      b.t_act = hadamard(d);
      break;
    case TransformKind::Wus:
    case TransformKind::Wush: {
      b.w_factor = cholesky(m_w_block).lower;
      const Matrix inner = symmetrized(transpose_times(b.w_factor, m_x_block * b.w_factor));
      const SymEigen eig = sym_eigen(inner);
      const double floor = kEigenFloor * std::max(eig.eigenvalues.front(), 0.0);
      b.eigenvalues = eig.eigenvalues;
      if (!(floor > 0.0)) throw Error(Errc::NotPositiveDefinite, "activation moment block is zero");
      for (double& l : b.eigenvalues) l = std::max(l, floor);
      // Lambda^(-1/4) U^T W'^T
      Matrix t = transpose_times(eig.eigenvectors, b.w_factor.transposed());
      for (std::size_t i = 0; i < d; ++i) {
        const double f = std::pow(b.eigenvalues[i], -0.25);
        for (double& v : t.row(i)) v *= f;
      }
      b.t_act = kind == TransformKind::Wush ? hadamard(d) * t : std::move(t);
      break;
    }
  }
  if (kind == TransformKind::Wus || kind == TransformKind::Wush) {
    b.t_weight = invert(b.t_act).transposed();
  } else {
    // Orthogonal kinds: the inverse transpose is the matrix itself.
    b.t_weight = b.t_act;
  }
  return b;
}

LayerPlan build_layer_plan(const Matrix& w, const Matrix& x, const QuantScheme& scheme, TransformKind kind,
                           const PlanOptions& options) {
  const std::size_t d = static_cast<std::size_t>(scheme.group_size());
  if (w.rows() != x.rows()) throw Error(Errc::ShapeMismatch, "w and x must share d_in rows");
  if (w.rows() == 0 || w.rows() % d != 0) {
    throw Error(Errc::ShapeMismatch, "d_in = " + std::to_string(w.rows()) + " is not a multiple of " +
                                         std::to_string(d));
  }
  const bool needs_moments = kind == TransformKind::Wus || kind == TransformKind::Wush;
  MomentPair moments;
  if (needs_moments) moments = second_moments(w, x, options.damp);

  const std::size_t n_blocks = w.rows() / d;
  const QuantScheme weight_scheme = scheme.with_rounding(Rounding::NearestEven);
  LayerPlan plan{std::vector<BlockTransform>(n_blocks), std::vector<Matrix>(n_blocks), scheme, d};
  parallel_for(n_blocks, options.workers, [&](std::size_t i) {
    const std::size_t r0 = i * d;
    const std::uint64_t block_seed = options.shared_rotation ? options.seed : Rng::derive(options.seed, i);
    if (needs_moments) {
      plan.blocks[i] = build_block(kind, moments.m_w.block(r0, r0, d, d), moments.m_x.block(r0, r0, d, d),
                                   block_seed, i);
    } else {
      const Matrix eye = Matrix::identity(d);
      plan.blocks[i] = build_block(kind, eye, eye, block_seed, i);
    }
    plan.prequantized_weights[i] =
        quantize_matrix(plan.blocks[i].t_weight * w.block(r0, 0, d, w.cols()), weight_scheme);
  });
  return plan;
}

}  // namespace wush
