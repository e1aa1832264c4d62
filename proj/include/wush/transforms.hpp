#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wush/matrix.hpp"
#include "wush/parallel.hpp"
#include "wush/quant.hpp"

namespace wush {

enum class TransformKind { Identity, Random, Hadamard, Wus, Wush };

// "i", "r", "h", "wus", "wush".
std::string to_string(TransformKind k);
TransformKind parse_transform_kind(std::string_view name);
const std::vector<TransformKind>& all_transform_kinds();

// t_act multiplies activation blocks; t_weight = t_act^-T multiplies weight
// blocks, so t_weight^T t_act = I and the product W^T X is preserved.
struct BlockTransform {
  Matrix t_act;
  Matrix t_weight;
  TransformKind kind = TransformKind::Identity;
  std::size_t block_index = 0;
  std::uint64_t seed = 0;            // rotation seed for Random
  std::vector<double> eigenvalues;   // Lambda (after flooring) for Wus/Wush
  Matrix w_factor;                   // Cholesky factor W' for Wus/Wush
};

struct MomentPair {
  Matrix m_x;
  Matrix m_w;
  double damp = 0.0;
};

// m_x = X X^T / d_batch and m_w = W W^T / d_out, each damped by
// damp * mean(diag) * I on the full d_in x d_in moment.
MomentPair second_moments(const Matrix& w, const Matrix& x, double damp);

// Eigenvalues below kEigenFloor * lambda_max are raised to that floor before Lambda^(-1/4).
constexpr double kEigenFloor = 1e-10;

BlockTransform build_block(TransformKind kind, const Matrix& m_w_block, const Matrix& m_x_block,
                           std::uint64_t seed = 0, std::size_t block_index = 0);

struct LayerPlan {
  std::vector<BlockTransform> blocks;
  std::vector<Matrix> prequantized_weights;  // q(t_weight W_(i)), each d x d_out
  QuantScheme scheme;
  std::size_t group_size = 0;
};

struct PlanOptions {
  double damp = 0.01;
  std::uint64_t seed = 0;
  // Random kind: one rotation for all blocks instead of one per block.
  bool shared_rotation = false;
  std::size_t workers = default_workers();
};

// Transform block size equals scheme.group_size(). Blocks are built
// independently; block i of the Random kind uses seed Rng::derive(seed, i).
LayerPlan build_layer_plan(const Matrix& w, const Matrix& x, const QuantScheme& scheme, TransformKind kind,
                           const PlanOptions& options = {});

}  // namespace wush
