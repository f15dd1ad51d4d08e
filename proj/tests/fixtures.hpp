#pragma once

#include <numbers>

#include "shotcorr/spectra.hpp"

namespace fixture {

// GaAs double-dot nuclear bath: omega_l / 2pi = 0.1 Hz, omega_e / 2pi = 10 kHz,
// g = -0.44. The rms field of 2 mT is an assumption.
inline constexpr double kOmegaL = 2.0 * std::numbers::pi * 0.1;
inline constexpr double kOmegaE = 2.0 * std::numbers::pi * 1.0e4;
inline constexpr double kCoupling = 0.44 * shotcorr::kBohrMagnetonOverHbar;
inline constexpr double kRms = 2.0e-3;

inline shotcorr::OverhauserModel overhauser(double gamma = 1.0, double rms = kRms, double omega_e = kOmegaE) {
  return {shotcorr::overhauser_s0_for_rms(rms, kOmegaL), kOmegaL, omega_e, gamma, kCoupling};
}

}  // namespace fixture
