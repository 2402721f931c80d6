#pragma once

// Interface units (mm^2, atm) to and from the SI used internally.

namespace ewars {

inline constexpr double kPaPerAtm = 101325.0;

constexpr double mm2_to_m2(double mm2) { return mm2 * 1e-6; }
constexpr double m2_to_mm2(double m2) { return m2 * 1e6; }
constexpr double atm_to_pa(double atm) { return atm * kPaPerAtm; }
constexpr double pa_to_atm(double pa) { return pa / kPaPerAtm; }

}  // namespace ewars
