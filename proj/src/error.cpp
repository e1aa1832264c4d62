#include "wush/error.hpp"

namespace wush {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NaNInput: return "NaNInput";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::NotPowerOfTwo: return "NotPowerOfTwo";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::InvalidFormat: return "InvalidFormat";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::InvalidCovariance: return "InvalidCovariance";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::BadMagic: return "BadMagic";
    case Errc::BadHeader: return "BadHeader";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::DimOverflow: return "DimOverflow";
    case Errc::IoFailure: return "IoFailure";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::Singular: return "Singular";
  }
  return "Unknown";
}

}  // namespace wush
