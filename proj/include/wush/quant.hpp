#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "wush/matrix.hpp"
#include "wush/rng.hpp"

namespace wush {

// Floating-point micro-format EaMb. Normal values are 2^(e - bias) (1 + m 2^-b);
// with subnormals, e = 0 encodes 2^(1 - bias) m 2^-b (so zero is on the grid).
// Without subnormals, e = 0 is an ordinary normal binade. The top
// `reserved_top_codes` encodings (NaN/Inf) are excluded from the grid.
struct FpFormat {
  std::string name;
  int exp_bits = 0;
  int mant_bits = 0;
  int bias = 0;
  bool subnormals = true;
  int reserved_top_codes = 0;

  // bias 2^(a-1) - 1, subnormals on, no reserved codes.
  static FpFormat standard(int exp_bits, int mant_bits);
  static FpFormat e2m1();   // 0, 0.5, ..., 6
  static FpFormat e4m3();   // OCP E4M3FN: max 448, single NaN code
  static FpFormat e8m0();   // 2^-127 .. 2^127, 0xFF is NaN
  static FpFormat bf16();   // IEEE-style E8M7, top binade reserved

  void validate() const;
  friend bool operator==(const FpFormat&, const FpFormat&) = default;
};

// Symmetric integer levels -(2^(b-1) - 1) .. 2^(b-1) - 1.
struct IntSpec {
  int bits = 4;
  friend bool operator==(const IntSpec&, const IntSpec&) = default;
};

using ValueFormat = std::variant<FpFormat, IntSpec>;

// Sorted nonnegative magnitudes of the format.
std::vector<double> enumerate_grid(const FpFormat& f);

// Nearest grid value to x (ties to even code), clamped to +-max.
double rtn_value(double x, const FpFormat& f);

// Magnitude grid with rounding queries. Integer grids are handled arithmetically.
class Grid {
 public:
  explicit Grid(const FpFormat& f);
  explicit Grid(IntSpec spec);

  double max() const noexcept { return max_; }
  double min_positive() const noexcept { return min_positive_; }
  bool is_integer() const noexcept { return integer_; }
  const std::vector<double>& magnitudes() const noexcept { return magnitudes_; }

  // |x| must be finite. Sign is carried through; out-of-range values clamp.
  double nearest(double x) const;
  // Stochastic rounding between the two bracketing grid points with
  // probability proportional to proximity; unbiased inside [-max, max].
  double stochastic(double x, Rng& rng) const;
  // Smallest grid magnitude >= x (clamped to max) and largest <= x (clamped to
  // the smallest positive magnitude); x > 0.
  double ceil(double x) const;
  double floor(double x) const;
  bool contains(double x) const;

 private:
  // Index of the largest magnitude <= a, for a in [magnitudes_.front(), max_).
  std::size_t lower_index(double a) const;

  bool integer_ = false;
  std::vector<double> magnitudes_;
  std::vector<std::uint32_t> codes_;
  double max_ = 0.0;
  double min_positive_ = 0.0;
};

enum class Rounding { NearestEven, Stochastic };
enum class ScaleRounding { Nearest, Ceil, Floor };

std::string to_string(Rounding r);
std::string to_string(ScaleRounding r);

// Gaussian MSE-optimal AbsMax clipping multiplier for INT4 groups of 32 with
// continuous scales; reproduced by gaussian_mse_clip(4, 32).
constexpr double kInt4GaussianClip32 = 0.95129;

// Expected squared error per element of RTN-quantizing groups of `group_size`
// i.i.d. standard Gaussians on the symmetric `bits` integer grid with scale
// clip * absmax / (2^(bits-1) - 1). Computed by numeric integration over the
// density of the group absmax with closed-form per-cell Gaussian moments.
double gaussian_group_mse(int bits, int group_size, double clip);
// Grid search of gaussian_group_mse over clip in (0, 1].
double gaussian_mse_clip(int bits, int group_size);

// Value format + scale format + group size + rounding/clipping policy.
class QuantScheme {
 public:
  QuantScheme(std::string name, ValueFormat value, FpFormat scale, int group_size,
              Rounding rounding = Rounding::NearestEven, ScaleRounding scale_rounding = ScaleRounding::Nearest,
              std::optional<double> clipping = std::nullopt);

  // E2M1 values, E8M0 scales (power-of-two ceiling), group 32.
  static QuantScheme mxfp4(ScaleRounding scale_rounding = ScaleRounding::Ceil);
  // E2M1 values, E4M3 scales (nearest), group 16.
  static QuantScheme nvfp4();
  // Levels -7..7, BF16 scales, Gaussian MSE clipping, group 32.
  static QuantScheme int4();
  // Symmetric integer of `bits` bits with BF16 scales and no clipping.
  static QuantScheme integer(int bits, int group_size);
  // "mxfp4", "nvfp4", "int4", or "intN" (N in 2..24, group 32).
  static QuantScheme by_name(const std::string& name);

  QuantScheme with_rounding(Rounding r) const;
  QuantScheme with_group_size(int group_size) const;

  const std::string& name() const noexcept { return name_; }
  const ValueFormat& value_format() const noexcept { return value_; }
  const FpFormat& scale_format() const noexcept { return scale_; }
  int group_size() const noexcept { return group_size_; }
  Rounding rounding() const noexcept { return rounding_; }
  ScaleRounding scale_rounding() const noexcept { return scale_rounding_; }
  std::optional<double> clipping() const noexcept { return clipping_; }

  const Grid& value_grid() const noexcept { return *value_grid_; }
  const Grid& scale_grid() const noexcept { return *scale_grid_; }

  // Scale for a group with the given AbsMax: clipping * absmax / grid_max,
  // mapped into the scale format; zero groups get the smallest positive scale.
  // With stochastic rounding the clipping is dropped and the scale rounds up.
  double select_scale(double absmax) const;

 private:
  std::string name_;
  ValueFormat value_;
  FpFormat scale_;
  int group_size_;
  Rounding rounding_;
  ScaleRounding scale_rounding_;
  std::optional<double> clipping_;
  std::shared_ptr<const Grid> value_grid_;
  std::shared_ptr<const Grid> scale_grid_;
};

struct QuantizedGroup {
  std::vector<double> codes;  // on the value grid, before scaling
  double scale = 0.0;
  std::vector<double> dequantized;
};

// Quantizes one d x 1 group. `rng` is required when the scheme rounds stochastically.
QuantizedGroup quantize_group(std::span<const double> v, const QuantScheme& s, Rng* rng = nullptr);

// Quantizes every group_size x 1 sub-column independently and returns the
// dequantized matrix. In stochastic mode sub-column (column j, group g) draws from
// Rng::substream(seed, j * groups_per_column + g).
Matrix quantize_matrix(const Matrix& m, const QuantScheme& s, std::uint64_t seed = 0);

}  // namespace wush
