#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wush {

enum class Errc {
  // input validation
  ShapeMismatch,
  NaNInput,
  NotSymmetric,
  NotPowerOfTwo,
  OutOfRange,
  InvalidFormat,
  InvalidSpec,
  InvalidCovariance,
  InvalidConfig,
  BadMagic,
  BadHeader,
  UnsupportedVersion,
  TruncatedPayload,
  DimOverflow,
  IoFailure,
  // numerical failure
  NotPositiveDefinite,
  NoConvergence,
  Singular,
};

std::string_view to_string(Errc code) noexcept;

/// True for failures of a numerical routine on valid input (as opposed to bad input).
constexpr bool is_numerical(Errc code) noexcept {
  return code == Errc::NotPositiveDefinite || code == Errc::NoConvergence || code == Errc::Singular;
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace wush
