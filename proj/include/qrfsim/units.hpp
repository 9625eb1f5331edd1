#pragma once

#include "qrfsim/error.hpp"

namespace qrfsim {

/// Physical constants used by every evaluator. Defaults are CODATA 2018.
struct UnitSystem {
  double G = 6.67430e-11;        // m^3 kg^-1 s^-2
  double c = 299792458.0;        // m/s
  double hbar = 1.054571817e-34; // J s

  void validate() const {
    if (!(G > 0.0) || !(c > 0.0) || !(hbar > 0.0)) {
      fail(ErrorCode::ValidationError, "unit constants G, c, hbar must be strictly positive");
    }
  }

  friend bool operator==(const UnitSystem&, const UnitSystem&) = default;
};

inline constexpr double kPlanckTime = 5.391247e-44;  // s

}  // namespace qrfsim
