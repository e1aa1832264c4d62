#include <cmath>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "wush/config.hpp"
#include "wush/sweep.hpp"
#include "wush/tensor_io.hpp"

namespace wush {
namespace {

using testing::error_code;

const char* const kSmall = R"({
  "layers": [{"name": "toy", "synthetic": {"d_in": 64, "d_out": 16, "d_batch": 128, "outlier_count": 1,
                                          "outlier_magnitude": 8, "seed": 3}}],
  "transforms": ["h", "wush"],
  "schemes": ["mxfp4"],
  "seeds": [1, 2, 3]
})";

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidConfig);
    return e.what();
  }
  return "";
}

TEST(Config, ParsesDefaults) {
  const ExperimentConfig c = parse_config(kSmall);
  ASSERT_EQ(c.layers.size(), 1u);
  EXPECT_EQ(c.layers[0].synthetic->d_in, 64u);
  EXPECT_EQ(c.layers[0].synthetic->tail, Tail::StudentT);
  EXPECT_EQ(c.transforms, (std::vector<TransformKind>{TransformKind::Hadamard, TransformKind::Wush}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(c.damp, 0.01);
  EXPECT_FALSE(c.group_size);
  const std::string echo = config_echo(c);
  EXPECT_NE(echo.find("# damp=0.01"), std::string::npos);
  EXPECT_NE(echo.find("# layers[0].synthetic.dof=4"), std::string::npos);
  EXPECT_NE(echo.find("# activation_rounding=nearest_even"), std::string::npos);
}

TEST(Config, Rejections) {
  EXPECT_NE(config_error(R"({"layers": [{"name": "a", "synthetic": {}}], "transforms": [],
                              "schemes": ["int4"], "seeds": [0]})").find("transforms"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"layers": [{"name": "a", "synthetic": {"d_inn": 4}}], "transforms": ["i"],
                              "schemes": ["int4"], "seeds": [0]})").find("layers[0].synthetic.d_inn"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"layers": [{"name": "a", "synthetic": {}}], "transforms": ["qr"],
                              "schemes": ["int4"], "seeds": [0]})").find("transforms[0]"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"layers": [{"name": "a", "synthetic": {"d_in": 48}}], "transforms": ["i"],
                              "schemes": ["int4"], "seeds": [0]})").find("d_in"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"layers": [{"name": "a", "synthetic": {}}, {"name": "a", "synthetic": {}}],
                              "transforms": ["i"], "schemes": ["int4"], "seeds": [0]})").find("duplicate"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"layers": [{"name": "a", "synthetic": {}}], "transforms": ["i"],
                              "schemes": ["fp3"], "seeds": [0]})").find("schemes[0]"),
            std::string::npos);
  EXPECT_NE(config_error("{\n  \"layers\": [,]\n}").find("line 2"), std::string::npos);
  EXPECT_NE(config_error(R"({"layers": [{"name": "a", "synthetic": {}}], "transforms": ["i"],
                              "schemes": ["int4"], "seeds": [-1]})").find("seeds[0]"),
            std::string::npos);
}

TEST(Config, GroupSizeOverride) {
  ExperimentConfig c = parse_config(kSmall);
  c.group_size = 64;
  EXPECT_EQ(resolve_scheme(c, "nvfp4").group_size(), 64);
  c.activation_rounding = Rounding::Stochastic;
  EXPECT_EQ(resolve_scheme(c, "int4").rounding(), Rounding::Stochastic);
}

TEST(Sweep, RowCountAndOrder) {
  const ExperimentConfig c = parse_config(kSmall);
  const SweepResult r = run_sweep(c);
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.rows[0].transform, "h");
  EXPECT_EQ(r.rows[3].transform, "wush");
  EXPECT_EQ(r.rows[4].seed, 2u);
  for (const SweepRow& row : r.rows) {
    EXPECT_EQ(row.block, "sum");
    EXPECT_GT(row.loss, 0.0);
    EXPECT_EQ(row.elapsed_ms, 0.0);
  }
}

TEST(Sweep, Reproducible) {
  ExperimentConfig c = parse_config(kSmall);
  c.workers = 4;
  const std::string a = to_csv(c, run_sweep(c));
  EXPECT_EQ(a, to_csv(c, run_sweep(c)));
  // The worker count is echoed but does not change any row.
  c.workers = 1;
  const std::string b = to_csv(c, run_sweep(c));
  ASSERT_NE(a.find(kCsvHeader), std::string::npos);
  EXPECT_EQ(a.substr(a.find(kCsvHeader)), b.substr(b.find(kCsvHeader)));
}

TEST(Sweep, CellMatchesDirectLoss) {
  const ExperimentConfig c = parse_config(kSmall);
  const SweepResult r = run_sweep(c);
  SyntheticSpec spec = *c.layers[0].synthetic;
  spec.seed = Rng::derive(spec.seed, 2);
  const SyntheticData d = gen_synthetic(spec);
  LossOptions o;
  o.seed = Rng::derive(2, 0);
  const LossReport ref = layer_loss(d.w, d.x, TransformKind::Wush, QuantScheme::mxfp4(), o);
  EXPECT_EQ(r.rows[4].layer_loss, ref.layer_loss);
  EXPECT_EQ(r.rows[4].loss, ref.blockwise_sum);
}

TEST(Sweep, BlocksAndRepeats) {
  ExperimentConfig c = parse_config(kSmall);
  c.emit_blocks = true;
  c.transforms = {TransformKind::Random};
  c.random_repeats = 3;
  const SweepResult r = run_sweep(c);
  ASSERT_EQ(r.rows.size(), 9u);
  EXPECT_EQ(r.rows[0].block, "0");
  EXPECT_EQ(r.rows[1].block, "1");
  EXPECT_EQ(r.rows[2].block, "sum");
  EXPECT_EQ(r.cells[0].reports.size(), 3u);
  EXPECT_NEAR(r.rows[0].loss + r.rows[1].loss, r.rows[2].loss, 1e-12 * r.rows[2].loss);
}

TEST(Sweep, FailedCellsBecomeErrorRows) {
  const auto dir = testing::scratch_dir("sweep_errors");
  write_tensor((dir / "w.wten").string(), Matrix(64, 4, 1.0));
  const ExperimentConfig missing = parse_config(R"({
    "layers": [{"name": "gone", "w": ")" + (dir / "w.wten").string() + R"(", "x": "/nonexistent/x.wten"},
               {"name": "ok", "synthetic": {"d_in": 64, "d_out": 8, "d_batch": 64}}],
    "transforms": ["i"], "schemes": ["int4"], "seeds": [0]})");
  const SweepResult r = run_sweep(missing);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].block, "error:IoFailure");
  EXPECT_TRUE(std::isnan(r.rows[0].loss));
  EXPECT_EQ(r.rows[1].block, "sum");
  EXPECT_EQ(r.exit_code, 1);

  // Zero activations make the WUSH block singular: a numerical failure.
  write_tensor((dir / "x.wten").string(), Matrix(64, 16));
  const ExperimentConfig zero = parse_config(R"({
    "layers": [{"name": "z", "w": ")" + (dir / "w.wten").string() + R"(", "x": ")" + (dir / "x.wten").string() + R"("}],
    "transforms": ["wush", "i"], "schemes": ["int4"], "seeds": [0], "damp": 0})");
  const SweepResult z = run_sweep(zero);
  EXPECT_EQ(z.rows[0].block, "error:NotPositiveDefinite");
  EXPECT_EQ(z.rows[1].block, "sum");
  EXPECT_EQ(z.exit_code, 2);
}

}  // namespace
}  // namespace wush
