#include "wush/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wush/error.hpp"
#include "wush/linalg.hpp"

namespace wush {

namespace {

void check_plan_input(const LayerPlan& plan, const Matrix& x) {
  const std::size_t d = plan.group_size;
  if (x.rows() != plan.blocks.size() * d) {
    throw Error(Errc::ShapeMismatch, "x has " + std::to_string(x.rows()) + " rows, plan expects " +
                                         std::to_string(plan.blocks.size() * d));
  }
}

Matrix quantized_activations(const LayerPlan& plan, const Matrix& x, std::size_t i, std::uint64_t act_seed) {
  const std::size_t d = plan.group_size;
  return quantize_matrix(plan.blocks[i].t_act * x.block(i * d, 0, d, x.cols()), plan.scheme,
                         Rng::derive(act_seed, i));
}

}  // namespace

Matrix forward_quantized(const LayerPlan& plan, const Matrix& x, std::uint64_t act_seed) {
  check_plan_input(plan, x);
  const std::size_t d_out = plan.prequantized_weights.empty() ? 0 : plan.prequantized_weights.front().cols();
  Matrix y(d_out, x.cols());
  for (std::size_t i = 0; i < plan.blocks.size(); ++i) {
    y += transpose_times(plan.prequantized_weights[i], quantized_activations(plan, x, i, act_seed));
  }
  return y;
}

LossReport layer_loss(const Matrix& w, const Matrix& x, TransformKind kind, const QuantScheme& scheme,
                      const LossOptions& options) {
  if (w.rows() != x.rows()) throw Error(Errc::ShapeMismatch, "w and x must share d_in rows");
  PlanOptions po;
  po.damp = options.damp;
  po.seed = options.seed;
  po.shared_rotation = options.shared_rotation;
  po.workers = options.workers;
  const LayerPlan plan = build_layer_plan(w, x, scheme, kind, po);

  const std::size_t d = plan.group_size;
  const std::size_t n_blocks = plan.blocks.size();
  const double norm = static_cast<double>(w.cols()) * static_cast<double>(x.cols());
  const bool stochastic = scheme.rounding() == Rounding::Stochastic;
  const std::size_t passes = stochastic ? std::max<std::size_t>(1, options.stochastic_passes) : 1;

  LossReport r;
  r.transform = to_string(kind);
  r.scheme = scheme.name();
  r.seed = options.seed;
  r.group_size = d;
  r.blockwise_losses.assign(n_blocks, 0.0);

  // Exact transformed operands do not depend on the pass.
  std::vector<Matrix> tx(n_blocks), e_w(n_blocks), w_t(n_blocks), exact(n_blocks);
  parallel_for(n_blocks, options.workers, [&](std::size_t i) {
    const Matrix xb = x.block(i * d, 0, d, x.cols());
    const Matrix wb = w.block(i * d, 0, d, w.cols());
    tx[i] = plan.blocks[i].t_act * xb;
    w_t[i] = plan.blocks[i].t_weight * wb;
    e_w[i] = plan.prequantized_weights[i] - w_t[i];
    exact[i] = transpose_times(wb, xb);
  });

  const std::uint64_t pass_root = Rng::derive(options.seed, 0x5eed0ac7ULL);
  for (std::size_t p = 0; p < passes; ++p) {
    const std::uint64_t act_seed = Rng::derive(pass_root, p);
    std::vector<Matrix> diff(n_blocks), first_order(n_blocks);
    parallel_for(n_blocks, options.workers, [&](std::size_t i) {
      const Matrix xq = quantize_matrix(tx[i], plan.scheme, Rng::derive(act_seed, i));
      const Matrix e_x = xq - tx[i];
      diff[i] = transpose_times(plan.prequantized_weights[i], xq) - exact[i];
      first_order[i] = transpose_times(w_t[i], e_x) + transpose_times(e_w[i], tx[i]);
    });
    Matrix total(w.cols(), x.cols());
    Matrix first(w.cols(), x.cols());
    for (std::size_t i = 0; i < n_blocks; ++i) {
      r.blockwise_losses[i] += diff[i].frobenius_norm_sq() / norm / static_cast<double>(passes);
      total += diff[i];
      first += first_order[i];
    }
    r.frobenius_sq += total.frobenius_norm_sq() / static_cast<double>(passes);
    r.first_order_loss += first.frobenius_norm_sq() / norm / static_cast<double>(passes);
  }
  r.layer_loss = r.frobenius_sq / norm;
  r.blockwise_sum = std::accumulate(r.blockwise_losses.begin(), r.blockwise_losses.end(), 0.0);
  r.additivity_gap = r.layer_loss > 0.0 ? std::abs(r.layer_loss - r.blockwise_sum) / r.layer_loss : 0.0;
  r.cross_term_ratio = r.layer_loss > 0.0 ? std::abs(r.layer_loss - r.first_order_loss) / r.layer_loss : 0.0;
  return r;
}

std::string to_string(Tail t) {
  switch (t) {
    case Tail::Gaussian: return "gaussian";
    case Tail::Laplacian: return "laplacian";
    case Tail::StudentT: return "student_t";
  }
  return "?";
}

Tail parse_tail(const std::string& name) {
  if (name == "gaussian") return Tail::Gaussian;
  if (name == "laplacian") return Tail::Laplacian;
  if (name == "student_t") return Tail::StudentT;
  throw Error(Errc::InvalidSpec, "unknown tail '" + name + "' (expected gaussian, laplacian, student_t)");
}

namespace {

std::vector<double> resolve_spectrum(const std::vector<double>& given, double decay, std::size_t d,
                                     const char* what) {
  if (given.empty()) {
    if (!std::isfinite(decay)) throw Error(Errc::InvalidSpec, std::string(what) + " decay must be finite");
    std::vector<double> s(d);
    for (std::size_t k = 0; k < d; ++k) s[k] = std::pow(static_cast<double>(k + 1), -decay);
    return s;
  }
  if (given.size() != d) {
    throw Error(Errc::InvalidSpec, std::string(what) + " has " + std::to_string(given.size()) +
                                       " entries, expected d_in = " + std::to_string(d));
  }
  for (double v : given) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(Errc::InvalidSpec, std::string(what) + " must be positive");
  }
  return given;
}

// Q diag(sqrt(spectrum)) Z with Z i.i.d. unit-variance draws of the tail family.
Matrix draw(std::size_t d, std::size_t n, const std::vector<double>& spectrum, const SyntheticSpec& spec,
            std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0));
  Matrix z(d, n);
  for (std::size_t i = 0; i < d; ++i) {
    const double s = std::sqrt(spectrum[i]);
    for (double& v : z.row(i)) {
      double u = 0.0;
      switch (spec.tail) {
        case Tail::Gaussian: u = rng.normal(); break;
        case Tail::Laplacian: u = rng.laplace_unit_variance(); break;
        case Tail::StudentT: u = rng.student_t_unit_variance(spec.dof); break;
      }
      v = s * u;
    }
  }
  if (!spec.rotate_basis) return z;
  return random_rotation(d, Rng::derive(seed, 1)) * z;
}

}  // namespace

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  if (spec.d_in == 0 || spec.d_out == 0 || spec.d_batch == 0) {
    throw Error(Errc::InvalidSpec, "dimensions must be positive");
  }
  if (spec.tail == Tail::StudentT && !(spec.dof > 2.0)) {
    throw Error(Errc::InvalidSpec, "student_t needs dof > 2 for a finite variance");
  }
  if (spec.outlier_count > spec.d_in) throw Error(Errc::InvalidSpec, "outlier_count exceeds d_in");
  if (!(spec.outlier_magnitude > 0.0) || !std::isfinite(spec.outlier_magnitude)) {
    throw Error(Errc::InvalidSpec, "outlier_magnitude must be positive");
  }
  const auto sx = resolve_spectrum(spec.spectrum, spec.spectrum_decay, spec.d_in, "spectrum");
  const auto sw = resolve_spectrum(spec.weight_spectrum, spec.weight_spectrum_decay, spec.d_in, "weight_spectrum");

  SyntheticData out;
  out.x = draw(spec.d_in, spec.d_batch, sx, spec, Rng::derive(spec.seed, 1));
  out.w = draw(spec.d_in, spec.d_out, sw, spec, Rng::derive(spec.seed, 2));

  std::vector<std::size_t> rows(spec.d_in);
  std::iota(rows.begin(), rows.end(), 0);
  Rng pick(Rng::derive(spec.seed, 3));
  for (std::size_t k = 0; k < spec.outlier_count; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(pick.next_u64() % (spec.d_in - k));
    std::swap(rows[k], rows[j]);
  }
  rows.resize(spec.outlier_count);
  std::sort(rows.begin(), rows.end());
  for (std::size_t r : rows) {
    for (double& v : out.x.row(r)) v *= spec.outlier_magnitude;
  }
  out.outlier_rows = std::move(rows);
  return out;
}

}  // namespace wush
