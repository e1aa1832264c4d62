// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "wush/cli.hpp"
#include "wush/linalg.hpp"
#include "wush/noise.hpp"
#include "wush/pipeline.hpp"
#include "wush/quant.hpp"
#include "wush/stats_bounds.hpp"
#include "wush/transforms.hpp"
#include "wush/validation.hpp"

namespace {

using namespace wush;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

constexpr std::size_t kFpSamples = 100000;
const NoiseModel kFpModel = NoiseModel::fp(1, 0);

Outcome fp_optimality() {
  Outcome o;
  double lo = 1e9, hi = 0.0;
  for (std::size_t d : {16u, 32u}) {
    for (std::uint64_t i = 0; i < 20; ++i) {
      const ReducedInstance inst = reduced_instance(d, 1000 * d + i);
      const FpValidation v = validate_fp_instance(inst, kFpModel, kFpSamples, 7 + i);
      lo = std::min(lo, v.ratio);
      hi = std::max(hi, v.ratio);
      o.pass = o.pass && v.ratio >= 0.97 && v.ratio <= 1.05;
    }
  }
  o.detail = "40 instances, loss / bound in [" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "]";
  return o;
}

Outcome orthogonal_futility() {
  Outcome o;
  int agree = 0, total = 0, above = 0, gapped = 0;
  double worst_z = 0.0;
  for (std::size_t d : {16u, 32u}) {
    for (std::uint64_t i = 0; i < 10; ++i) {
      const ReducedInstance inst = reduced_instance(d, 2000 * d + i);
      const double e2 = kFpModel.second_moment();
      const double orth = e2 * inst.trace_s2;
      const LossEstimate opt = one_sided_loss_mc(inst.t_opt, inst.y_moment, kFpModel, kFpSamples, 11 + i);
      const std::vector<Matrix> ts{Matrix::identity(d), hadamard(d), random_rotation(d, 3000 + i)};
      for (std::size_t k = 0; k < ts.size(); ++k) {
        const LossEstimate e = one_sided_loss_mc(ts[k], inst.y_moment, kFpModel, kFpSamples, 100 * i + k);
        const double z = std::abs(e.mean - orth) / e.std_error;
        worst_z = std::max(worst_z, z);
        ++total;
        agree += z <= 3.0;
        const double se = std::hypot(e.std_error, opt.std_error);
        if (orth - e2 * inst.trace_s * inst.trace_s / d > 5.0 * se) {
          ++gapped;
          above += e.mean > opt.mean;
        }
      }
    }
  }
  o.pass = agree == total && above == gapped;
  o.detail = std::to_string(agree) + "/" + std::to_string(total) + " within 3 SE of E[eta^2] tr(S^2) (max " +
             fmt("%.2f", worst_z) + " SE), " + std::to_string(above) + "/" + std::to_string(gapped) +
             " above the optimum";
  return o;
}

Outcome int_bound_chain() {
  Outcome o;
  int within = 0, refined = 0, total = 0;
  const NoiseModel model = NoiseModel::integer(4);
  for (std::size_t d : {16u, 32u}) {
    for (std::uint64_t i = 0; i < 100; ++i) {
      const ReducedInstance inst = reduced_instance(d, 4000 * d + i);
      const IntValidation v = validate_int_instance(inst, model, 20000, 13 + i);
      ++total;
      within += v.within();
      refined += v.normalized < v.gaussian;
    }
  }
  o.pass = within == total && refined == total;
  o.detail = std::to_string(within) + "/" + std::to_string(total) + " inside [(tr S)^2/d, (tr S)^2], " +
             std::to_string(refined) + "/" + std::to_string(total) + " below (2 ln 2d + 2)(tr S)^2/d";
  return o;
}

Outcome max_inequality() {
  Outcome o;
  int held = 0, total = 0;
  double worst = 0.0;
  for (Family f : {Family::Gaussian, Family::Laplacian}) {
    for (bool corr : {false, true}) {
      for (std::size_t d = 1; d <= 1024; d *= 2) {
        const MaxSqEstimate e = mc_max_sq(f, d, corr, 1000000, 17 + d);
        ++total;
        held += e.holds();
        if (d > 1) worst = std::max(worst, (e.empirical + 3.0 * e.std_error) / e.bound);
      }
    }
  }
  o.pass = held == total;
  o.detail = std::to_string(held) + "/" + std::to_string(total) + " rows hold, max (emp + 3 SE) / bound for d > 1 = " +
             fmt("%.4f", worst);
  return o;
}

Outcome exact_algebra() {
  Outcome o;
  double had = 0.0, pair = 0.0, equal = 0.0, iso = 0.0;
  for (std::size_t d = 1; d <= 128; d *= 2) {
    const Matrix h = hadamard(d);
    const double entry = 1.0 / std::sqrt(static_cast<double>(d));
    for (double v : h.data()) had = std::max(had, std::abs(std::abs(v) - entry));
    had = std::max(had, max_abs_diff(h * h.transposed(), Matrix::identity(d)));
  }
  for (std::size_t d : {16u, 32u, 64u}) {
    for (std::uint64_t i = 0; i < 5; ++i) {
      const Matrix m_w = random_spd(d, 5000 + i);
      const Matrix m_x = random_spd(d, 6000 + i);
      for (TransformKind k : all_transform_kinds()) {
        const BlockTransform b = build_block(k, m_w, m_x, 7000 + i);
        pair = std::max(pair, max_abs_diff(b.t_act * b.t_weight.transposed(), Matrix::identity(d)));
      }
      const BlockTransform b = build_block(TransformKind::Wush, m_w, m_x);
      const Matrix c = b.t_act * m_x * b.t_act.transposed();
      const double mean = c.trace() / d;
      for (std::size_t k = 0; k < d; ++k) equal = std::max(equal, std::abs(c(k, k) - mean) / mean);
    }
    const Matrix eye = Matrix::identity(d);
    iso = std::max(iso, max_abs_diff(build_block(TransformKind::Wush, eye, eye).t_act, hadamard(d)));
  }
  o.pass = had <= 1e-12 && pair <= 1e-8 && equal <= 1e-8 && iso <= 1e-12;
  o.detail = "hadamard " + fmt("%.1e", had) + ", pairing " + fmt("%.1e", pair) + ", equalization " +
             fmt("%.1e", equal) + ", isotropy " + fmt("%.1e", iso);
  return o;
}

Outcome quantizer_correctness() {
  Outcome o;
  Rng rng(23);
  const bool grid = enumerate_grid(FpFormat::e2m1()) == std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0};

  bool mx_pow2 = true, nv_e4m3 = true, idem = true;
  const Grid e4m3(FpFormat::e4m3());
  Matrix m(64, 64);
  for (double& v : m.data()) v = rng.student_t_unit_variance(4.0);
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (std::size_t g = 0; g < 2; ++g) {
      const QuantizedGroup q = quantize_group(m.block(32 * g, j, 32, 1).column(0), QuantScheme::mxfp4());
      int e = 0;
      mx_pow2 = mx_pow2 && std::frexp(q.scale, &e) == 0.5;
    }
    for (std::size_t g = 0; g < 4; ++g) {
      const QuantizedGroup q = quantize_group(m.block(16 * g, j, 16, 1).column(0), QuantScheme::nvfp4());
      nv_e4m3 = nv_e4m3 && e4m3.contains(q.scale) && e4m3.nearest(q.scale) == q.scale;
    }
  }
  for (const QuantScheme& s : {QuantScheme::mxfp4(), QuantScheme::nvfp4()}) {
    const Matrix once = quantize_matrix(m, s);
    idem = idem && quantize_matrix(once, s) == once;
  }

  double worst_z = 0.0;
  for (const QuantScheme& base : {QuantScheme::int4(), QuantScheme::mxfp4(), QuantScheme::nvfp4()}) {
    const QuantScheme s = base.with_rounding(Rounding::Stochastic);
    const std::size_t n = static_cast<std::size_t>(s.group_size());
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
    constexpr int kReps = 100000;
    Rng r(29);
    for (int rep = 0; rep < kReps; ++rep) {
      const QuantizedGroup q = quantize_group(v, s, &r);
      for (std::size_t i = 0; i < n; ++i) {
        const double e = q.dequantized[i] - v[i];
        sum[i] += e;
        sum_sq[i] += e * e;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double mean = sum[i] / kReps;
      const double se = std::sqrt(std::max(sum_sq[i] / kReps - mean * mean, 0.0) / kReps);
      if (se > 0.0) {
        worst_z = std::max(worst_z, std::abs(mean) / se);
      } else if (mean != 0.0) {
        worst_z = INFINITY;
      }
    }
  }
  o.pass = grid && mx_pow2 && nv_e4m3 && idem && worst_z <= 4.0;
  o.detail = std::string("e2m1 grid ") + (grid ? "exact" : "wrong") + ", mxfp4 scales " +
             (mx_pow2 ? "powers of two" : "not powers of two") + ", nvfp4 scales " +
             (nv_e4m3 ? "on E4M3" : "off E4M3") + ", idempotence " + (idem ? "holds" : "fails") +
             ", stochastic bias max " + fmt("%.2f", worst_z) + " SE";
  return o;
}

SyntheticSpec criterion7_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.d_in = 128;
  s.d_out = 128;
  s.d_batch = 1024;
  s.spectrum_decay = 1.0;
  s.weight_spectrum_decay = 1.0;
  s.tail = Tail::StudentT;
  s.dof = 4.0;
  s.outlier_count = 2;
  s.outlier_magnitude = 10.0;
  s.seed = seed;
  return s;
}

struct DirectionalCounts {
  int seeds = 0;
  int int4_order = 0;
  int mx_wush_below_h = 0;
  int nv_close_and_below = 0;
  double max_cross = 0.0;
};

DirectionalCounts run_directional() {
  DirectionalCounts c;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const SyntheticData data = gen_synthetic(criterion7_spec(seed));
    LossOptions o;
    o.seed = seed;
    auto loss = [&](TransformKind k, const QuantScheme& s) {
      const LossReport r = layer_loss(data.w, data.x, k, s, o);
      c.max_cross = std::max(c.max_cross, r.cross_term_ratio);
      return r.layer_loss;
    };
    const QuantScheme int4 = QuantScheme::int4();
    const double i_i = loss(TransformKind::Identity, int4);
    const double i_h = loss(TransformKind::Hadamard, int4);
    const double i_w = loss(TransformKind::Wush, int4);
    const double m_h = loss(TransformKind::Hadamard, QuantScheme::mxfp4());
    const double m_w = loss(TransformKind::Wush, QuantScheme::mxfp4());
    const double n_h = loss(TransformKind::Hadamard, QuantScheme::nvfp4());
    const double n_s = loss(TransformKind::Wus, QuantScheme::nvfp4());
    const double n_w = loss(TransformKind::Wush, QuantScheme::nvfp4());
    ++c.seeds;
    c.int4_order += i_w < i_h && i_h < i_i;
    c.mx_wush_below_h += m_w < m_h;
    c.nv_close_and_below += std::abs(n_s - n_w) <= 0.1 * std::min(n_s, n_w) && n_s < n_h && n_w < n_h;
  }
  return c;
}

Outcome directional(const DirectionalCounts& c) {
  Outcome o;
  const double n = c.seeds;
  o.pass = c.int4_order >= 0.95 * n && c.mx_wush_below_h >= 0.90 * n && c.nv_close_and_below >= 0.90 * n;
  o.detail = "int4 wush<h<i " + std::to_string(c.int4_order) + "/40, mxfp4 wush<h " +
             std::to_string(c.mx_wush_below_h) + "/40, nvfp4 wus~wush<h " + std::to_string(c.nv_close_and_below) +
             "/40";
  return o;
}

Outcome cross_term(const DirectionalCounts& c) {
  Outcome o;
  o.pass = c.max_cross < 0.2;
  o.detail = "max |loss - first order| / loss = " + fmt("%.4f", c.max_cross);
  return o;
}

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"wush-cli"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Outcome sweep_determinism() {
  Outcome o;
  const auto dir = std::filesystem::temp_directory_path() / "wush_acceptance_sweep";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "c.json");
    f << R"({
  "layers": [
    {"name": "heavy", "synthetic": {"d_in": 128, "d_out": 64, "d_batch": 256, "outlier_count": 2,
                                    "outlier_magnitude": 10, "seed": 1}},
    {"name": "gauss", "synthetic": {"d_in": 64, "d_out": 32, "d_batch": 128, "tail": "gaussian", "seed": 2}}
  ],
  "transforms": ["i", "r", "h", "wus", "wush"],
  "schemes": ["int4", "mxfp4", "nvfp4"],
  "seeds": [0, 1],
  "activation_rounding": "stochastic",
  "mc_samples": 2,
  "random_repeats": 2,
  "emit_blocks": true
})";
  }
  const std::string cfg = (dir / "c.json").string();
  const int a = cli({"sweep", "--config", cfg, "--out", (dir / "a.csv").string()});
  const int b = cli({"sweep", "--config", cfg, "--out", (dir / "b.csv").string()});
  const std::string ca = slurp(dir / "a.csv");
  const std::string cb = slurp(dir / "b.csv");
  o.pass = a == 0 && b == 0 && !ca.empty() && ca == cb;
  o.detail = std::to_string(std::count(ca.begin(), ca.end(), '\n')) + " lines, " +
             (ca == cb ? "byte-identical" : "different");
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int n, const char* name, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };
  auto guarded = [&](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };
  report(1, "fp optimality", guarded(fp_optimality));
  report(2, "orthogonal transforms", guarded(orthogonal_futility));
  report(3, "int bound chain", guarded(int_bound_chain));
  report(4, "maximum inequality", guarded(max_inequality));
  report(5, "exact algebra", guarded(exact_algebra));
  report(6, "quantizers", guarded(quantizer_correctness));
  DirectionalCounts counts;
  bool counts_ok = true;
  std::string counts_error;
  try {
    counts = run_directional();
  } catch (const std::exception& e) {
    counts_ok = false;
    counts_error = e.what();
  }
  report(7, "directional ordering", counts_ok ? directional(counts) : Outcome{false, counts_error});
  report(8, "cross term", counts_ok ? cross_term(counts) : Outcome{false, counts_error});
  report(9, "sweep determinism", guarded(sweep_determinism));
  return failed == 0 ? 0 : 1;
}
