#pragma once

#include <cmath>
#include <string>

#include "densesynth/core/error.hpp"
#include "densesynth/core/types.hpp"

namespace densesynth {

/// Raised with the offending kind and value when a density reading is invalid.
class InvalidDensity : public InvalidInput {
 public:
  InvalidDensity(DensityKind kind, double value)
      : InvalidInput("invalid density value " + std::to_string(value) + " for kind " +
                     to_string(kind)),
        kind_(kind),
        value_(value) {}
  [[nodiscard]] DensityKind kind() const noexcept { return kind_; }
  [[nodiscard]] double value() const noexcept { return value_; }

 private:
  DensityKind kind_;
  double value_;
};

inline void validate_density(const DensityMeasure& m) {
  const double v = m.value;
  if (!std::isfinite(v)) throw InvalidDensity(m.kind, v);
  switch (m.kind) {
    case DensityKind::VOLPARA_VBD_PERCENT:
    case DensityKind::LIBRA_PERCENT:
      if (v < 0.0 || v > 100.0) throw InvalidDensity(m.kind, v);
      break;
    case DensityKind::ACR_CLASS:
    case DensityKind::BIRADS_DIRECT:
      if (v != std::floor(v) || v < 1.0 || v > 4.0) throw InvalidDensity(m.kind, v);
      break;
  }
}

/// Maps a density reading to its BI-RADS category.
///
/// Boundary table (interior cut points):
///
///   kind    A          B             C              D
///   VBD %   <= 3.5     (3.5, 7.5]    (7.5, 15.5)    >= 15.5
///   LIBRA % <= 2.8     (2.8, 25)     [25, 75)       >= 75
///   ACR     1          2             3              4
inline DensityCategory map_density(const DensityMeasure& m) {
  validate_density(m);
  const double v = m.value;
  switch (m.kind) {
    case DensityKind::VOLPARA_VBD_PERCENT:
      if (v <= 3.5) return DensityCategory::A;
      if (v <= 7.5) return DensityCategory::B;
      if (v < 15.5) return DensityCategory::C;
      return DensityCategory::D;
    case DensityKind::LIBRA_PERCENT:
      if (v <= 2.8) return DensityCategory::A;
      if (v < 25.0) return DensityCategory::B;
      if (v < 75.0) return DensityCategory::C;
      return DensityCategory::D;
    case DensityKind::ACR_CLASS:
    case DensityKind::BIRADS_DIRECT:
      return static_cast<DensityCategory>(static_cast<int>(v) - 1);
  }
  throw InvalidDensity(m.kind, v);
}

}  // namespace densesynth
