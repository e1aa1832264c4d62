#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wush/config.hpp"
#include "wush/error.hpp"
#include "wush/pipeline.hpp"

namespace wush {

struct SweepRow {
  std::string layer;
  std::string transform;
  std::string format;
  std::uint64_t seed = 0;
  std::string block;  // block index, "sum" (loss = sum of block losses), or "error:<code>"
  double loss = 0.0;
  double layer_loss = 0.0;
  double elapsed_ms = 0.0;
};

struct SweepCell {
  std::string layer;
  TransformKind transform = TransformKind::Identity;
  std::string format;
  std::uint64_t seed = 0;
  // Reports of every random repeat (one for the other kinds).
  std::vector<LossReport> reports;
  std::optional<Errc> error;
  std::string error_message;
  double elapsed_ms = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // ordered by layer, transform, scheme, seed
  std::vector<SweepRow> rows;
  // 0 when every cell succeeded; 1 if any failed on invalid input; 2 if any failed numerically.
  int exit_code = 0;
};

// Synthetic data for cell seed s uses SyntheticSpec::seed = Rng::derive(spec.seed, s).
// Random-rotation repeat r of a cell uses plan seed Rng::derive(s, r).
SweepResult run_sweep(const ExperimentConfig& config);

inline constexpr const char* kCsvHeader = "layer,transform,format,seed,block,loss,layer_loss,elapsed_ms";

// Config echo, header and rows.
std::string to_csv(const ExperimentConfig& config, const SweepResult& result);

}  // namespace wush
