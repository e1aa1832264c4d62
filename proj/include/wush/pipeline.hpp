#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wush/matrix.hpp"
#include "wush/quant.hpp"
#include "wush/transforms.hpp"

namespace wush {

// sum_i What_(i)^T q(t_act_i X_(i)). Activations are quantized with the plan's
// scheme; in stochastic mode block i draws from seed Rng::derive(act_seed, i).
Matrix forward_quantized(const LayerPlan& plan, const Matrix& x, std::uint64_t act_seed = 0);

struct LossOptions {
  double damp = 0.01;
  std::uint64_t seed = 0;
  bool shared_rotation = false;
  // Number of stochastic activation passes averaged when the scheme rounds
  // stochastically; ignored for nearest rounding.
  std::size_t stochastic_passes = 1;
  std::size_t workers = default_workers();
};

struct LossReport {
  std::string transform;
  std::string scheme;
  std::uint64_t seed = 0;
  std::size_t group_size = 0;

  double frobenius_sq = 0.0;  // ||Yhat - W^T X||_F^2
  double layer_loss = 0.0;    // frobenius_sq / (d_out d_batch), the per-element normalization
  std::vector<double> blockwise_losses;
  double blockwise_sum = 0.0;
  double additivity_gap = 0.0;  // |layer_loss - blockwise_sum| / layer_loss

  // Loss of the first-order error sum_i (W_(i)^T t_w^T E_x + E_w^T t_act X_(i)),
  // dropping E_w^T E_x, and its relative distance to layer_loss.
  double first_order_loss = 0.0;
  double cross_term_ratio = 0.0;
};

LossReport layer_loss(const Matrix& w, const Matrix& x, TransformKind kind, const QuantScheme& scheme,
                      const LossOptions& options = {});

enum class Tail { Gaussian, Laplacian, StudentT };

std::string to_string(Tail t);
Tail parse_tail(const std::string& name);

struct SyntheticSpec {
  std::size_t d_in = 128;
  std::size_t d_out = 128;
  std::size_t d_batch = 1024;
  // Covariance eigenvalues of the x columns; empty means k^-decay, k = 1..d_in.
  std::vector<double> spectrum;
  double spectrum_decay = 1.0;
  // Same for the w columns.
  std::vector<double> weight_spectrum;
  double weight_spectrum_decay = 1.0;
  Tail tail = Tail::StudentT;
  double dof = 4.0;
  // Rows of x (channels) scaled by outlier_magnitude; every column gets exactly
  // outlier_count scaled entries.
  std::size_t outlier_count = 0;
  double outlier_magnitude = 1.0;
  // Rotate the covariance eigenbasis with a seeded random rotation (else axis-aligned).
  bool rotate_basis = true;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Matrix w;  // d_in x d_out
  Matrix x;  // d_in x d_batch
  std::vector<std::size_t> outlier_rows;
};

SyntheticData gen_synthetic(const SyntheticSpec& spec);

}  // namespace wush
