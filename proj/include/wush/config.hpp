#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wush/pipeline.hpp"
#include "wush/quant.hpp"
#include "wush/transforms.hpp"

namespace wush {

// One layer's data: either a synthetic spec or a pair of tensor files.
struct LayerSource {
  std::string name;
  std::optional<SyntheticSpec> synthetic;
  std::string w_path;
  std::string x_path;
};

struct ExperimentConfig {
  std::vector<LayerSource> layers;
  std::vector<TransformKind> transforms;
  std::vector<std::string> schemes;
  std::vector<std::uint64_t> seeds;
  double damp = 0.01;
  // Overrides every scheme's group size (and so the transform block size).
  std::optional<int> group_size;
  std::string output;
  // Stochastic activation passes averaged per cell; only used with stochastic rounding.
  std::size_t mc_samples = 1;
  // Random-rotation cells average this many independently seeded rotations.
  std::size_t random_repeats = 1;
  Rounding activation_rounding = Rounding::NearestEven;
  bool shared_rotation = false;
  bool emit_blocks = false;
  // When false, elapsed_ms is written as 0 so that output is reproducible byte for byte.
  bool record_timing = false;
  std::size_t workers = 0;  // 0: hardware concurrency
};

// Strict JSON schema: unknown keys and wrong types are rejected with the field
// path; syntax errors report line and column. Throws Error(InvalidConfig).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Resolved scheme for a config entry, with the group size override applied.
QuantScheme resolve_scheme(const ExperimentConfig& c, const std::string& name);

// Every resolved setting, defaults included, as "# key=value" lines.
std::string config_echo(const ExperimentConfig& c);

}  // namespace wush
