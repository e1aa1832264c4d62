#include "wush/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wush/error.hpp"
#include "wush/noise.hpp"
#include "wush/numfmt.hpp"
#include "wush/pipeline.hpp"
#include "wush/stats_bounds.hpp"
#include "wush/sweep.hpp"
#include "wush/tensor_io.hpp"
#include "wush/transforms.hpp"
#include "wush/validation.hpp"

namespace wush {

namespace {

struct GenArgs {
  SyntheticSpec spec;
  std::string tail = "student_t";
  bool axis_aligned = false;
  std::string w_out;
  std::string x_out;
  std::string dtype = "f64";
};

struct LayerArgs {
  std::string w;
  std::string x;
  std::string transform = "wush";
  std::string format = "int4";
  double damp = 0.01;
  std::uint64_t seed = 0;
  int group_size = 0;
  bool stochastic = false;
  std::size_t passes = 1;
};

struct ValidateArgs {
  std::size_t d = 32;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  int value_bits = 1;
  int scale_bits = 0;
  int int_bits = 4;
};

struct BoundsArgs {
  std::string family = "all";
  std::size_t max_d = 1024;
  std::size_t samples = 1000000;
  std::uint64_t seed = 0;
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoFailure, "cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error(Errc::IoFailure, "write to '" + path + "' failed");
}

DType parse_dtype(const std::string& s) {
  if (s == "f64") return DType::F64;
  if (s == "f32") return DType::F32;
  throw Error(Errc::InvalidSpec, "dtype must be f32 or f64");
}

QuantScheme layer_scheme(const LayerArgs& a) {
  QuantScheme s = QuantScheme::by_name(a.format);
  if (a.stochastic) s = s.with_rounding(Rounding::Stochastic);
  return a.group_size > 0 ? s.with_group_size(a.group_size) : s;
}

int run_gen(GenArgs& a, std::ostream& out) {
  a.spec.tail = parse_tail(a.tail);
  a.spec.rotate_basis = !a.axis_aligned;
  const DType dtype = parse_dtype(a.dtype);
  const SyntheticData d = gen_synthetic(a.spec);
  write_tensor(a.w_out, d.w, dtype);
  write_tensor(a.x_out, d.x, dtype);
  out << "w=" << a.w_out << " rows=" << d.w.rows() << " cols=" << d.w.cols() << "\n";
  out << "x=" << a.x_out << " rows=" << d.x.rows() << " cols=" << d.x.cols() << "\n";
  return 0;
}

int run_plan(const LayerArgs& a, const std::string& dir, std::ostream& out) {
  const Matrix w = read_tensor(a.w);
  const Matrix x = read_tensor(a.x);
  const QuantScheme scheme = layer_scheme(a);
  PlanOptions po;
  po.damp = a.damp;
  po.seed = a.seed;
  const LayerPlan plan = build_layer_plan(w, x, scheme, parse_transform_kind(a.transform), po);
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["transform"] = a.transform;
  manifest["format"] = scheme.name();
  manifest["group_size"] = plan.group_size;
  manifest["damp"] = a.damp;
  manifest["seed"] = a.seed;
  manifest["blocks"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < plan.blocks.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "block_%04zu", i);
    const std::string base = std::string(stem);
    write_tensor((std::filesystem::path(dir) / (base + "_t_act.wten")).string(), plan.blocks[i].t_act);
    write_tensor((std::filesystem::path(dir) / (base + "_t_weight.wten")).string(), plan.blocks[i].t_weight);
    write_tensor((std::filesystem::path(dir) / (base + "_w_quant.wten")).string(), plan.prequantized_weights[i]);
    nlohmann::ordered_json b;
    b["index"] = i;
    b["t_act"] = base + "_t_act.wten";
    b["t_weight"] = base + "_t_weight.wten";
    b["w_quant"] = base + "_w_quant.wten";
    if (!plan.blocks[i].eigenvalues.empty()) {
      std::vector<std::string> ev;
      for (double v : plan.blocks[i].eigenvalues) ev.push_back(fmt17(v));
      b["eigenvalues"] = ev;
    }
    manifest["blocks"].push_back(b);
  }
  write_file((std::filesystem::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  out << "blocks=" << plan.blocks.size() << " dir=" << dir << "\n";
  return 0;
}

int run_loss(const LayerArgs& a, std::ostream& out) {
  const Matrix w = read_tensor(a.w);
  const Matrix x = read_tensor(a.x);
  LossOptions o;
  o.damp = a.damp;
  o.seed = a.seed;
  o.stochastic_passes = a.passes;
  const LossReport r = layer_loss(w, x, parse_transform_kind(a.transform), layer_scheme(a), o);
  out << "transform=" << r.transform << "\nformat=" << r.scheme << "\nseed=" << r.seed << "\ngroup_size=" << r.group_size
      << "\n";
  out << "layer_loss=" << fmt17(r.layer_loss) << "\nfrobenius_sq=" << fmt17(r.frobenius_sq) << "\n";
  out << "blockwise_sum=" << fmt17(r.blockwise_sum) << "\nadditivity_gap=" << fmt17(r.additivity_gap) << "\n";
  out << "first_order_loss=" << fmt17(r.first_order_loss) << "\ncross_term_ratio=" << fmt17(r.cross_term_ratio)
      << "\n";
  for (std::size_t i = 0; i < r.blockwise_losses.size(); ++i) {
    out << "block[" << i << "]=" << fmt17(r.blockwise_losses[i]) << "\n";
  }
  return 0;
}

int run_sweep_cmd(const std::string& config_path, const std::string& out_path, std::ostream& out,
                  std::ostream& err) {
  const ExperimentConfig c = load_config(config_path);
  const SweepResult r = run_sweep(c);
  for (const SweepCell& cell : r.cells) {
    if (cell.error) err << "cell " << cell.layer << "/" << to_string(cell.transform) << "/" << cell.format << "/"
                        << cell.seed << " failed: " << cell.error_message << "\n";
  }
  const std::string csv = to_csv(c, r);
  const std::string target = out_path.empty() ? c.output : out_path;
  if (target.empty()) {
    out << csv;
  } else {
    write_file(target, csv);
    out << "rows=" << r.rows.size() << " output=" << target << "\n";
  }
  return r.exit_code;
}

constexpr double kFpRatioLow = 0.97;
constexpr double kFpRatioHigh = 1.05;

int run_validate_fp(const ValidateArgs& a, std::ostream& out) {
  const NoiseModel model = NoiseModel::fp(a.value_bits, a.scale_bits);
  bool ok = true;
  out << "trial,d,loss,se,lower_bound,ratio,orthogonal\n";
  for (std::size_t t = 0; t < a.trials; ++t) {
    const ReducedInstance inst = reduced_instance(a.d, Rng::derive(a.seed, t));
    const FpValidation v = validate_fp_instance(inst, model, a.samples, Rng::derive(a.seed, 1000003 + t));
    out << t << ',' << a.d << ',' << fmt17(v.loss.mean) << ',' << fmt17(v.loss.std_error) << ','
        << fmt17(v.lower_bound) << ',' << fmt17(v.ratio) << ',' << fmt17(v.orthogonal) << "\n";
    ok = ok && v.ratio >= kFpRatioLow && v.ratio <= kFpRatioHigh;
  }
  out << (ok ? "PASS" : "FAIL") << " ratio within [" << kFpRatioLow << ", " << kFpRatioHigh << "]\n";
  return ok ? 0 : 2;
}

int run_validate_int(const ValidateArgs& a, std::ostream& out) {
  const NoiseModel model = NoiseModel::integer(a.int_bits);
  bool ok = true;
  out << "trial,d,normalized_loss,se,lower,upper,gaussian_refined\n";
  for (std::size_t t = 0; t < a.trials; ++t) {
    const ReducedInstance inst = reduced_instance(a.d, Rng::derive(a.seed, t));
    const IntValidation v = validate_int_instance(inst, model, a.samples, Rng::derive(a.seed, 1000003 + t));
    out << t << ',' << a.d << ',' << fmt17(v.normalized) << ',' << fmt17(v.loss.std_error / model.second_moment())
        << ',' << fmt17(v.lower) << ',' << fmt17(v.upper) << ',' << fmt17(v.gaussian) << "\n";
    ok = ok && v.within() && v.normalized <= v.gaussian;
  }
  out << (ok ? "PASS" : "FAIL") << " lower <= loss / E[eta^2] <= min(upper, gaussian_refined)\n";
  return ok ? 0 : 2;
}

int run_bounds(const BoundsArgs& a, std::ostream& out) {
  std::vector<Family> families;
  if (a.family == "all") {
    families = {Family::Gaussian, Family::Laplacian};
  } else {
    families = {parse_family(a.family)};
  }
  bool ok = true;
  out << "family,d,correlated,empirical,se,bound,holds\n";
  std::uint64_t case_index = 0;
  for (Family f : families)
    for (bool corr : {false, true})
      for (std::size_t d = 1; d <= a.max_d; d *= 2) {
        const MaxSqEstimate e = mc_max_sq(f, d, corr, a.samples, Rng::derive(a.seed, case_index++));
        out << to_string(f) << ',' << d << ',' << (corr ? "true" : "false") << ',' << fmt17(e.empirical) << ','
            << fmt17(e.std_error) << ',' << fmt17(e.bound) << ',' << (e.holds() ? "true" : "false") << "\n";
        ok = ok && e.holds();
      }
  return ok ? 0 : 2;
}

void print_grid(const std::string& label, const Grid& g, std::ostream& out) {
  out << label << " max=" << fmt17(g.max()) << " min_positive=" << fmt17(g.min_positive());
  if (g.is_integer()) {
    out << " levels=-" << fmt17(g.max()) << "..+" << fmt17(g.max()) << "\n";
    return;
  }
  out << " count=" << g.magnitudes().size() << "\n";
  if (g.magnitudes().size() <= 64) {
    out << label << " magnitudes=";
    for (std::size_t i = 0; i < g.magnitudes().size(); ++i) out << (i ? "," : "") << fmt17(g.magnitudes()[i]);
    out << "\n";
  }
}

int run_grids(const std::string& name, std::ostream& out) {
  const std::map<std::string, FpFormat> raw = {{"e2m1", FpFormat::e2m1()},
                                               {"e4m3", FpFormat::e4m3()},
                                               {"e8m0", FpFormat::e8m0()},
                                               {"bf16", FpFormat::bf16()}};
  if (const auto it = raw.find(name); it != raw.end()) {
    print_grid(it->second.name, Grid(it->second), out);
    return 0;
  }
  const QuantScheme s = QuantScheme::by_name(name);
  out << "scheme=" << s.name() << " group_size=" << s.group_size() << " scale_rounding=" << to_string(s.scale_rounding())
      << " clipping=" << (s.clipping() ? fmt17(*s.clipping()) : std::string("none")) << "\n";
  const std::string value_label =
      std::holds_alternative<IntSpec>(s.value_format()) ? "INT" + std::to_string(std::get<IntSpec>(s.value_format()).bits)
                                                         : std::get<FpFormat>(s.value_format()).name;
  print_grid("value " + value_label, s.value_grid(), out);
  print_grid("scale " + s.scale_format().name, s.scale_grid(), out);
  return 0;
}

void add_layer_options(CLI::App* c, LayerArgs& a) {
  c->add_option("--w", a.w, "weight tensor (d_in x d_out)")->required();
  c->add_option("--x", a.x, "activation tensor (d_in x d_batch)")->required();
  c->add_option("--transform", a.transform, "i, r, h, wus or wush")->capture_default_str();
  c->add_option("--format", a.format, "mxfp4, nvfp4, int4 or intN")->capture_default_str();
  c->add_option("--damp", a.damp, "relative damping")->capture_default_str();
  c->add_option("--seed", a.seed)->capture_default_str();
  c->add_option("--group-size", a.group_size, "override the scheme group size (0 keeps it)");
  c->add_flag("--stochastic", a.stochastic, "stochastic activation rounding");
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Blockwise transforms for weight-activation quantization", "wush-cli"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "write synthetic w and x tensors");
  gen_cmd->add_option("--d-in", gen.spec.d_in)->capture_default_str();
  gen_cmd->add_option("--d-out", gen.spec.d_out)->capture_default_str();
  gen_cmd->add_option("--d-batch", gen.spec.d_batch)->capture_default_str();
  gen_cmd->add_option("--decay", gen.spec.spectrum_decay, "activation spectrum k^-decay")->capture_default_str();
  gen_cmd->add_option("--weight-decay", gen.spec.weight_spectrum_decay)->capture_default_str();
  gen_cmd->add_option("--tail", gen.tail, "gaussian, laplacian or student_t")->capture_default_str();
  gen_cmd->add_option("--dof", gen.spec.dof)->capture_default_str();
  gen_cmd->add_option("--outliers", gen.spec.outlier_count, "outlier channels")->capture_default_str();
  gen_cmd->add_option("--outlier-magnitude", gen.spec.outlier_magnitude)->capture_default_str();
  gen_cmd->add_flag("--axis-aligned", gen.axis_aligned, "do not rotate the covariance basis");
  gen_cmd->add_option("--seed", gen.spec.seed)->capture_default_str();
  gen_cmd->add_option("--w-out", gen.w_out)->required();
  gen_cmd->add_option("--x-out", gen.x_out)->required();
  gen_cmd->add_option("--dtype", gen.dtype, "f32 or f64")->capture_default_str();

  LayerArgs plan_args;
  std::string plan_dir;
  auto* plan_cmd = app.add_subcommand("plan", "build block transforms and pre-quantized weights");
  add_layer_options(plan_cmd, plan_args);
  plan_cmd->add_option("--out", plan_dir, "output directory")->required();

  LayerArgs loss_args;
  auto* loss_cmd = app.add_subcommand("loss", "layer loss for one transform and format");
  add_layer_options(loss_cmd, loss_args);
  loss_cmd->add_option("--passes", loss_args.passes, "stochastic passes averaged")->capture_default_str();

  std::string sweep_config;
  std::string sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a configured grid and write CSV");
  sweep_cmd->add_option("--config", sweep_config)->required();
  sweep_cmd->add_option("--out", sweep_out, "CSV path (overrides the config output)");

  ValidateArgs va;
  auto* validate_cmd = app.add_subcommand("validate", "noise-model optimality and bound checks");
  validate_cmd->require_subcommand(1);
  auto* vfp = validate_cmd->add_subcommand("fp", "FP model: loss at the optimal transform vs the lower bound");
  auto* vint = validate_cmd->add_subcommand("int", "INT model: loss within the bound chain");
  for (auto* c : {vfp, vint}) {
    c->add_option("--d", va.d)->capture_default_str();
    c->add_option("--samples", va.samples)->capture_default_str();
    c->add_option("--seed", va.seed)->capture_default_str();
    c->add_option("--trials", va.trials)->capture_default_str();
  }
  vfp->add_option("--value-bits", va.value_bits, "value mantissa bits")->capture_default_str();
  vfp->add_option("--scale-bits", va.scale_bits, "scale mantissa bits")->capture_default_str();
  vint->add_option("--bits", va.int_bits)->capture_default_str();

  BoundsArgs ba;
  auto* bounds_cmd = app.add_subcommand("bounds", "maximum inequality table");
  bounds_cmd->add_option("--family", ba.family, "gaussian, laplacian or all")->capture_default_str();
  bounds_cmd->add_option("--max-d", ba.max_d)->capture_default_str();
  bounds_cmd->add_option("--samples", ba.samples)->capture_default_str();
  bounds_cmd->add_option("--seed", ba.seed)->capture_default_str();

  std::string grid_format = "mxfp4";
  auto* grids_cmd = app.add_subcommand("grids", "print quantizer grids");
  grids_cmd->add_option("--format", grid_format, "scheme or raw format (e2m1, e4m3, e8m0, bf16)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen, out);
    if (plan_cmd->parsed()) return run_plan(plan_args, plan_dir, out);
    if (loss_cmd->parsed()) return run_loss(loss_args, out);
    if (sweep_cmd->parsed()) return run_sweep_cmd(sweep_config, sweep_out, out, err);
    if (vfp->parsed()) return run_validate_fp(va, out);
    if (vint->parsed()) return run_validate_int(va, out);
    if (bounds_cmd->parsed()) return run_bounds(ba, out);
    if (grids_cmd->parsed()) return run_grids(grid_format, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? 2 : 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace wush
