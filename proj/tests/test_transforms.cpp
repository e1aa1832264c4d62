#include <cmath>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "wush/linalg.hpp"
#include "wush/transforms.hpp"

namespace wush {
namespace {

using testing::error_code;
using testing::gaussian_matrix;

TEST(TransformKind, Names) {
  for (TransformKind k : all_transform_kinds()) EXPECT_EQ(parse_transform_kind(to_string(k)), k);
  EXPECT_EQ(all_transform_kinds().size(), 5u);
  EXPECT_EQ(error_code([] { parse_transform_kind("qr"); }), Errc::InvalidSpec);
}

TEST(SecondMoments, Examples) {
  const MomentPair p = second_moments(Matrix::identity(4), Matrix::identity(4), 0.0);
  EXPECT_EQ(p.m_x, 0.25 * Matrix::identity(4));

  Matrix w(3, 2);
  const std::vector<double> v{1.0, 2.0, -1.0};
  for (std::size_t i = 0; i < 3; ++i) w(i, 0) = v[i];
  const MomentPair q = second_moments(w, gaussian_matrix(3, 5, 1), 0.1);
  const double mean_diag = (1.0 + 4.0 + 1.0) / 3.0 / 2.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_NEAR(q.m_w(i, j), v[i] * v[j] / 2.0 + (i == j ? 0.1 * mean_diag : 0.0), 1e-15);
}

TEST(SecondMoments, DampingFloorsSpectrum) {
  const Matrix x = gaussian_matrix(64, 256, 2);
  const MomentPair p = second_moments(gaussian_matrix(64, 8, 3), x, 0.01);
  EXPECT_TRUE(is_symmetric(p.m_x, 0.0));
  const Matrix raw = gram(x, 256.0);
  const double floor = 0.01 * raw.trace() / 64.0;
  for (double l : sym_eigen(p.m_x).eigenvalues) EXPECT_GE(l, floor - 1e-10);
  EXPECT_EQ(error_code([&] { second_moments(Matrix(3, 2), x, 0.0); }), Errc::ShapeMismatch);
  EXPECT_EQ(error_code([&] { second_moments(Matrix(64, 2, 1.0), x, -1.0); }), Errc::OutOfRange);
}

TEST(BuildBlock, IsotropyGivesHadamard) {
  for (std::size_t d : {2u, 16u, 32u}) {
    const Matrix eye = Matrix::identity(d);
    const BlockTransform b = build_block(TransformKind::Wush, eye, eye);
    EXPECT_LE(max_abs_diff(b.t_act, hadamard(d)), 1e-12) << d;
    // c I on both moments: W' = sqrt(c) I and Lambda = c^2 I cancel.
    const BlockTransform c = build_block(TransformKind::Wush, 4.0 * eye, 4.0 * eye);
    EXPECT_LE(max_abs_diff(c.t_act, hadamard(d)), 1e-12) << d;
  }
}

TEST(BuildBlock, PairingForAllKinds) {
  const std::size_t d = 16;
  const Matrix m_w = random_spd(d, 4);
  const Matrix m_x = random_spd(d, 5);
  for (TransformKind k : all_transform_kinds()) {
    const BlockTransform b = build_block(k, m_w, m_x, 6);
    EXPECT_LE(max_abs_diff(b.t_act * b.t_weight.transposed(), Matrix::identity(d)), 1e-8) << to_string(k);
  }
}

TEST(BuildBlock, OrthogonalKinds) {
  const std::size_t d = 32;
  const Matrix eye = Matrix::identity(d);
  for (TransformKind k : {TransformKind::Identity, TransformKind::Random, TransformKind::Hadamard}) {
    const BlockTransform b = build_block(k, eye, eye, 7);
    EXPECT_LE(max_abs_diff(transpose_times(b.t_act, b.t_act), eye), 1e-10);
    EXPECT_EQ(b.t_act, b.t_weight);
  }
  EXPECT_EQ(build_block(TransformKind::Random, eye, eye, 7).t_act, random_rotation(d, 7));
}

TEST(BuildBlock, DiagonalEqualization) {
  const std::size_t d = 32;
  const Matrix m_w = random_spd(d, 8);
  const Matrix m_x = random_spd(d, 9);
  const BlockTransform b = build_block(TransformKind::Wush, m_w, m_x);
  const Matrix c = b.t_act * m_x * b.t_act.transposed();
  double mean = 0.0;
  for (std::size_t k = 0; k < d; ++k) mean += c(k, k) / d;
  for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(c(k, k), mean, 1e-8 * mean);
  // t_act M_X t_act^T = H Lambda^(1/2) H^T, so its trace is sum sqrt(lambda).
  double root_sum = 0.0;
  for (double l : b.eigenvalues) root_sum += std::sqrt(l);
  EXPECT_NEAR(c.trace(), root_sum, 1e-9 * root_sum);
}

TEST(BuildBlock, WusIsWushWithoutHadamard) {
  const std::size_t d = 16;
  const Matrix m_w = random_spd(d, 10);
  const Matrix m_x = random_spd(d, 11);
  const BlockTransform wus = build_block(TransformKind::Wus, m_w, m_x);
  const BlockTransform wush = build_block(TransformKind::Wush, m_w, m_x);
  EXPECT_LE(max_abs_diff(hadamard(d) * wus.t_act, wush.t_act), 1e-12);
  EXPECT_LE(max_abs_diff(wus.w_factor * wus.w_factor.transposed(), m_w), 1e-12);
  // The diagonalized weighted moment: t M_X t^T = Lambda^(1/2) exactly for WUS.
  const Matrix c = wus.t_act * m_x * wus.t_act.transposed();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      EXPECT_NEAR(c(i, j), i == j ? std::sqrt(wus.eigenvalues[i]) : 0.0, 1e-9);
}

TEST(BuildBlock, Errors) {
  const Matrix eye3 = Matrix::identity(3);
  EXPECT_EQ(error_code([&] { build_block(TransformKind::Hadamard, eye3, eye3); }), Errc::NotPowerOfTwo);
  const Matrix eye = Matrix::identity(4);
  EXPECT_EQ(error_code([&] { build_block(TransformKind::Wush, Matrix(4, 4), eye); }), Errc::NotPositiveDefinite);
  EXPECT_EQ(error_code([&] { build_block(TransformKind::Wush, eye, Matrix(4, 4)); }), Errc::NotPositiveDefinite);
  EXPECT_EQ(error_code([&] { build_block(TransformKind::Wush, eye, Matrix::identity(8)); }), Errc::ShapeMismatch);
}

TEST(LayerPlan, Partition) {
  const Matrix w = gaussian_matrix(64, 8, 12);
  const Matrix x = gaussian_matrix(64, 128, 13);
  const QuantScheme s = QuantScheme::mxfp4();
  const LayerPlan plan = build_layer_plan(w, x, s, TransformKind::Wush);
  ASSERT_EQ(plan.blocks.size(), 2u);
  EXPECT_EQ(plan.group_size, 32u);
  const MomentPair m = second_moments(w, x, 0.01);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(plan.blocks[i].block_index, i);
    const BlockTransform ref =
        build_block(TransformKind::Wush, m.m_w.block(i * 32, i * 32, 32, 32), m.m_x.block(i * 32, i * 32, 32, 32));
    EXPECT_EQ(plan.blocks[i].t_act, ref.t_act);
    EXPECT_EQ(plan.prequantized_weights[i], quantize_matrix(ref.t_weight * w.block(i * 32, 0, 32, 8), s));
  }
  EXPECT_EQ(error_code([&] { build_layer_plan(w.block(0, 0, 48, 8), x.block(0, 0, 48, 128), s,
                                              TransformKind::Identity); }),
            Errc::ShapeMismatch);
}

TEST(LayerPlan, Deterministic) {
  const Matrix w = gaussian_matrix(64, 8, 14);
  const Matrix x = gaussian_matrix(64, 128, 15);
  for (TransformKind k : all_transform_kinds()) {
    PlanOptions a;
    a.seed = 3;
    a.workers = 1;
    PlanOptions b = a;
    b.workers = 4;
    const LayerPlan p = build_layer_plan(w, x, QuantScheme::nvfp4(), k, a);
    const LayerPlan q = build_layer_plan(w, x, QuantScheme::nvfp4(), k, b);
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
      EXPECT_EQ(p.blocks[i].t_act, q.blocks[i].t_act);
      EXPECT_EQ(p.blocks[i].t_weight, q.blocks[i].t_weight);
      EXPECT_EQ(p.prequantized_weights[i], q.prequantized_weights[i]);
    }
  }
}

TEST(LayerPlan, RandomSeeds) {
  const Matrix w = gaussian_matrix(64, 4, 16);
  const Matrix x = gaussian_matrix(64, 64, 17);
  PlanOptions o;
  o.seed = 9;
  const LayerPlan per_block = build_layer_plan(w, x, QuantScheme::mxfp4(), TransformKind::Random, o);
  EXPECT_EQ(per_block.blocks[1].t_act, random_rotation(32, Rng::derive(9, 1)));
  EXPECT_NE(per_block.blocks[0].t_act, per_block.blocks[1].t_act);
  o.shared_rotation = true;
  const LayerPlan shared = build_layer_plan(w, x, QuantScheme::mxfp4(), TransformKind::Random, o);
  EXPECT_EQ(shared.blocks[0].t_act, shared.blocks[1].t_act);
}

}  // namespace
}  // namespace wush
