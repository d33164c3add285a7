#pragma once

#include <numbers>

namespace cryo {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Time is in ns throughout; rates and detunings are angular (rad/ns).
// Configuration quotes cyclic GHz, so f [GHz] -> 2*pi*f [rad/ns].
constexpr double ghz_to_rad(double f_ghz) { return two_pi * f_ghz; }
constexpr double rad_to_ghz(double w) { return w / two_pi; }

// 1 ueV / h = 0.2418 GHz
inline constexpr double ueV_per_h_ghz = 0.2418;
constexpr double ueV_to_rad(double a_ueV) { return two_pi * ueV_per_h_ghz * a_ueV; }

} // namespace cryo
