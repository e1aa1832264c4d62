#include "wush/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wush/error.hpp"

namespace wush {

FpFormat FpFormat::standard(int exp_bits, int mant_bits) {
  const int bias = exp_bits >= 1 ? (1 << (exp_bits - 1)) - 1 : 0;
  return {"E" + std::to_string(exp_bits) + "M" + std::to_string(mant_bits), exp_bits, mant_bits, bias, true, 0};
}

FpFormat FpFormat::e2m1() { return standard(2, 1); }
FpFormat FpFormat::e4m3() { return {"E4M3", 4, 3, 7, true, 1}; }
FpFormat FpFormat::e8m0() { return {"E8M0", 8, 0, 127, false, 1}; }
FpFormat FpFormat::bf16() { return {"BF16", 8, 7, 127, true, 128}; }

void FpFormat::validate() const {
  if (exp_bits < 1) throw Error(Errc::InvalidFormat, name + ": exponent bits must be >= 1");
  if (mant_bits < 0) throw Error(Errc::InvalidFormat, name + ": mantissa bits must be >= 0");
  if (exp_bits + mant_bits > 16) throw Error(Errc::InvalidFormat, name + ": more than 16 value bits");
  const int codes = 1 << (exp_bits + mant_bits);
  if (reserved_top_codes < 0 || reserved_top_codes >= codes) {
    throw Error(Errc::InvalidFormat, name + ": reserved code count out of range");
  }
}

namespace {

struct FpTable {
  std::vector<double> magnitudes;
  std::vector<std::uint32_t> codes;
};

FpTable build_table(const FpFormat& f) {
  f.validate();
  const std::uint32_t total = 1u << (f.exp_bits + f.mant_bits);
  const std::uint32_t usable = total - static_cast<std::uint32_t>(f.reserved_top_codes);
  const std::uint32_t mant_mask = (1u << f.mant_bits) - 1;
  FpTable t;
  t.magnitudes.reserve(usable);
  t.codes.reserve(usable);
  for (std::uint32_t code = 0; code < usable; ++code) {
    const int e = static_cast<int>(code >> f.mant_bits);
    const int m = static_cast<int>(code & mant_mask);
    double v;
    if (e == 0 && f.subnormals) {
      v = std::ldexp(static_cast<double>(m), 1 - f.bias - f.mant_bits);
    } else {
      v = std::ldexp(static_cast<double>((1 << f.mant_bits) + m), e - f.bias - f.mant_bits);
    }
    if (!t.magnitudes.empty() && !(v > t.magnitudes.back())) {
      throw Error(Errc::InvalidFormat, f.name + ": grid is not strictly increasing");
    }
    t.magnitudes.push_back(v);
    t.codes.push_back(code);
  }
  return t;
}

}  // namespace

std::vector<double> enumerate_grid(const FpFormat& f) { return build_table(f).magnitudes; }

double rtn_value(double x, const FpFormat& f) { return Grid(f).nearest(x); }

Grid::Grid(const FpFormat& f) {
  auto t = build_table(f);
  magnitudes_ = std::move(t.magnitudes);
  codes_ = std::move(t.codes);
  max_ = magnitudes_.back();
  min_positive_ = magnitudes_.front() > 0.0 ? magnitudes_.front() : magnitudes_.at(1);
}

Grid::Grid(IntSpec spec) : integer_(true) {
  if (spec.bits < 2 || spec.bits > 24) throw Error(Errc::InvalidFormat, "integer bits must be in [2, 24]");
  max_ = static_cast<double>((1 << (spec.bits - 1)) - 1);
  min_positive_ = 1.0;
}

std::size_t Grid::lower_index(double a) const {
  const auto it = std::upper_bound(magnitudes_.begin(), magnitudes_.end(), a);
  return static_cast<std::size_t>(it - magnitudes_.begin()) - 1;
}

double Grid::nearest(double x) const {
  if (std::isnan(x)) throw Error(Errc::NaNInput, "cannot round NaN");
  const double a = std::abs(x);
  double r;
  if (integer_) {
    r = std::min(std::nearbyint(a), max_);
  } else if (a >= max_) {
    r = max_;
  } else if (a <= magnitudes_.front()) {
    r = magnitudes_.front();
  } else {
    const std::size_t i = lower_index(a);
    const double lo = magnitudes_[i];
    const double hi = magnitudes_[i + 1];
    const double mid = lo + 0.5 * (hi - lo);
    if (a < mid) {
      r = lo;
    } else if (a > mid) {
      r = hi;
    } else {
      r = (codes_[i] & 1u) == 0 ? lo : hi;
    }
  }
  return std::copysign(r, x);
}

double Grid::stochastic(double x, Rng& rng) const {
  if (std::isnan(x)) throw Error(Errc::NaNInput, "cannot round NaN");
  const double a = std::abs(x);
  double r;
  if (a >= max_) {
    r = max_;
  } else if (integer_) {
    const double lo = std::floor(a);
    r = rng.uniform() < a - lo ? lo + 1.0 : lo;
  } else if (a <= magnitudes_.front()) {
    r = magnitudes_.front();
  } else {
    const std::size_t i = lower_index(a);
    const double lo = magnitudes_[i];
    const double hi = magnitudes_[i + 1];
    r = rng.uniform() < (a - lo) / (hi - lo) ? hi : lo;
  }
  return std::copysign(r, x);
}

double Grid::ceil(double x) const {
  if (integer_) return std::clamp(std::ceil(x), min_positive_, max_);
  const auto it = std::lower_bound(magnitudes_.begin(), magnitudes_.end(), x);
  if (it == magnitudes_.end()) return max_;
  return *it > 0.0 ? *it : min_positive_;
}

double Grid::floor(double x) const {
  if (integer_) return std::clamp(std::floor(x), min_positive_, max_);
  if (x < min_positive_) return min_positive_;
  if (x >= max_) return max_;
  return magnitudes_[lower_index(x)];
}

bool Grid::contains(double x) const {
  const double a = std::abs(x);
  if (integer_) return a <= max_ && std::floor(a) == a;
  return std::binary_search(magnitudes_.begin(), magnitudes_.end(), a);
}

std::string to_string(Rounding r) { return r == Rounding::NearestEven ? "nearest_even" : "stochastic"; }

std::string to_string(ScaleRounding r) {
  switch (r) {
    case ScaleRounding::Nearest: return "nearest";
    case ScaleRounding::Ceil: return "ceil";
    case ScaleRounding::Floor: return "floor";
  }
  return "nearest";
}

QuantScheme::QuantScheme(std::string name, ValueFormat value, FpFormat scale, int group_size, Rounding rounding,
                         ScaleRounding scale_rounding, std::optional<double> clipping)
    : name_(std::move(name)),
      value_(std::move(value)),
      scale_(std::move(scale)),
      group_size_(group_size),
      rounding_(rounding),
      scale_rounding_(scale_rounding),
      clipping_(clipping) {
  if (group_size_ != 16 && group_size_ != 32 && group_size_ != 64 && group_size_ != 128) {
    throw Error(Errc::InvalidSpec, "group size must be one of 16, 32, 64, 128; got " + std::to_string(group_size_));
  }
  if (clipping_ && !(*clipping_ > 0.0 && *clipping_ <= 1.0)) {
    throw Error(Errc::InvalidSpec, "clipping multiplier must be in (0, 1]");
  }
  value_grid_ = std::visit([](const auto& f) { return std::make_shared<const Grid>(f); }, value_);
  scale_grid_ = std::make_shared<const Grid>(scale_);
}

QuantScheme QuantScheme::mxfp4(ScaleRounding scale_rounding) {
  return {"mxfp4", FpFormat::e2m1(), FpFormat::e8m0(), 32, Rounding::NearestEven, scale_rounding};
}

QuantScheme QuantScheme::nvfp4() {
  return {"nvfp4", FpFormat::e2m1(), FpFormat::e4m3(), 16, Rounding::NearestEven, ScaleRounding::Nearest};
}

QuantScheme QuantScheme::int4() {
  return {"int4", IntSpec{4}, FpFormat::bf16(), 32, Rounding::NearestEven, ScaleRounding::Nearest,
          kInt4GaussianClip32};
}

QuantScheme QuantScheme::integer(int bits, int group_size) {
  // Ceil keeps the AbsMax element inside the grid despite BF16 scale rounding.
  return {"int" + std::to_string(bits), IntSpec{bits}, FpFormat::bf16(), group_size, Rounding::NearestEven,
          ScaleRounding::Ceil};
}

QuantScheme QuantScheme::by_name(const std::string& name) {
  if (name == "mxfp4") return mxfp4();
  if (name == "nvfp4") return nvfp4();
  if (name == "int4") return int4();
  if (name.size() > 3 && name.starts_with("int")) {
    const std::string digits = name.substr(3);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }) && digits.size() <= 2) {
      return integer(std::stoi(digits), 32);
    }
  }
  throw Error(Errc::InvalidSpec, "unknown quantization scheme '" + name + "'");
}

QuantScheme QuantScheme::with_rounding(Rounding r) const {
  QuantScheme copy = *this;
  copy.rounding_ = r;
  return copy;
}

QuantScheme QuantScheme::with_group_size(int group_size) const {
  return {name_, value_, scale_, group_size, rounding_, scale_rounding_, clipping_};
}

double QuantScheme::select_scale(double absmax) const {
  const Grid& sg = *scale_grid_;
  if (!(absmax > 0.0)) return sg.min_positive();
  // Stochastic rounding is unbiased only inside the grid, so it never clips.
  const bool stochastic = rounding_ == Rounding::Stochastic;
  const double raw = (stochastic ? 1.0 : clipping_.value_or(1.0)) * absmax / value_grid_->max();
  double s = 0.0;
  switch (stochastic ? ScaleRounding::Ceil : scale_rounding_) {
    case ScaleRounding::Nearest: s = sg.nearest(raw); break;
    case ScaleRounding::Ceil: s = sg.ceil(raw); break;
    case ScaleRounding::Floor: s = sg.floor(raw); break;
  }
  return s > 0.0 ? s : sg.min_positive();
}

QuantizedGroup quantize_group(std::span<const double> v, const QuantScheme& s, Rng* rng) {
  if (v.size() != static_cast<std::size_t>(s.group_size())) {
    throw Error(Errc::ShapeMismatch,
                "group length " + std::to_string(v.size()) + " != group size " + std::to_string(s.group_size()));
  }
  if (s.rounding() == Rounding::Stochastic && rng == nullptr) {
    throw Error(Errc::InvalidSpec, "stochastic rounding needs a random stream");
  }
  double absmax = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(Errc::NaNInput, "group contains NaN or Inf");
    absmax = std::max(absmax, std::abs(x));
  }
  QuantizedGroup g;
  g.scale = s.select_scale(absmax);
  g.codes.resize(v.size());
  g.dequantized.resize(v.size());
  const Grid& grid = s.value_grid();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double scaled = v[i] / g.scale;
    g.codes[i] = s.rounding() == Rounding::Stochastic ? grid.stochastic(scaled, *rng) : grid.nearest(scaled);
    g.dequantized[i] = g.codes[i] * g.scale;
  }
  return g;
}

Matrix quantize_matrix(const Matrix& m, const QuantScheme& s, std::uint64_t seed) {
  const std::size_t d = static_cast<std::size_t>(s.group_size());
  if (m.rows() % d != 0) {
    throw Error(Errc::ShapeMismatch,
                "rows " + std::to_string(m.rows()) + " not divisible by group size " + std::to_string(d));
  }
  const std::size_t groups = m.rows() / d;
  const bool stochastic = s.rounding() == Rounding::Stochastic;
  Matrix out(m.rows(), m.cols());
  std::vector<double> buf(d);
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t i = 0; i < d; ++i) buf[i] = m(g * d + i, j);
      std::optional<Rng> rng;
      if (stochastic) rng.emplace(Rng::derive(seed, j * groups + g));
      const auto q = quantize_group(buf, s, rng ? &*rng : nullptr);
      for (std::size_t i = 0; i < d; ++i) out(g * d + i, j) = q.dequantized[i];
    }
  }
  return out;
}

}  // namespace wush
