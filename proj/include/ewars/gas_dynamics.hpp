#pragma once

// Spatially lumped isentropic blowdown of a pressurized chamber through a
// single orifice. All quantities are SI: Pa, K, kg, m, s.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ewars {

inline constexpr double kStandardAtmosphere = 101325.0;  // Pa

struct GasModel {
  double gamma = 1.4;
  double r_specific = 287.0;  // J/(kg K)

  void validate() const {
    if (!(gamma > 1.0)) throw std::invalid_argument("GasModel: gamma must exceed 1");
    if (!(r_specific > 0.0)) throw std::invalid_argument("GasModel: r_specific must be positive");
  }
};

struct AmbientConditions {
  double p_atm = kStandardAtmosphere;

  void validate() const {
    if (!(p_atm > 0.0)) throw std::invalid_argument("AmbientConditions: p_atm must be positive");
  }
};

struct ChamberGeometry {
  double volume = 0.128;  // m^3, 800 x 400 x 400 mm nominal

  void validate() const {
    if (!(volume > 0.0)) throw std::invalid_argument("ChamberGeometry: volume must be positive");
  }
};

inline double density_from_ideal_gas(double p, double t, const GasModel& gas) {
  if (!(p > 0.0) || !(t > 0.0)) {
    throw std::domain_error("density_from_ideal_gas: pressure and temperature must be positive");
  }
  return p / (gas.r_specific * t);
}

struct InitialState {
  double p01 = 2.0 * kStandardAtmosphere;
  double t01 = 300.0;
  double rho01 = 0.0;
  double a01 = 0.0;

  // Derives rho01 and a01 from (p01, t01) so the ideal-gas invariants hold.
  static InitialState from(double p01, double t01, const GasModel& gas) {
    InitialState s;
    s.p01 = p01;
    s.t01 = t01;
    s.rho01 = density_from_ideal_gas(p01, t01, gas);
    s.a01 = std::sqrt(gas.gamma * gas.r_specific * t01);
    return s;
  }
};

enum class FlowStage { Choked, Unchoked, Equalized };

inline const char* to_string(FlowStage s) {
  switch (s) {
    case FlowStage::Choked: return "choked";
    case FlowStage::Unchoked: return "unchoked";
    case FlowStage::Equalized: return "equalized";
  }
  return "?";
}

struct StageCoefficients {
  double c_one = 0.0;  // dp/dt = c_one * p^((3g-1)/(2g)), Pa/s
  double c_two = 0.0;  // d(p/p_atm)/dt, 1/s
};

inline StageCoefficients scaled(const StageCoefficients& unit, double a_e) {
  return {unit.c_one * a_e, unit.c_two * a_e};
}

struct TrajectorySample {
  double time = 0.0;
  double pressure = 0.0;
};

struct PressureTrajectory {
  std::vector<TrajectorySample> samples;
  double leak_area = 0.0;
};

// Reservoir-to-ambient ratio at which the exit chokes, ((g+1)/2)^(g/(g-1)).
inline double critical_pressure_ratio(const GasModel& gas) {
  return std::pow(0.5 * (gas.gamma + 1.0), gas.gamma / (gas.gamma - 1.0));
}

inline FlowStage stage_of(double p0, const AmbientConditions& ambient, const GasModel& gas) {
  if (!(p0 > 0.0)) throw std::domain_error("stage_of: pressure must be positive");
  if (p0 <= ambient.p_atm) return FlowStage::Equalized;
  if (p0 >= critical_pressure_ratio(gas) * ambient.p_atm) return FlowStage::Choked;
  return FlowStage::Unchoked;
}

inline StageCoefficients stage_coefficients(double a_e, const ChamberGeometry& geom,
                                            const InitialState& init, const GasModel& gas,
                                            const AmbientConditions& ambient) {
  if (!(a_e >= 0.0)) throw std::domain_error("stage_coefficients: leak area must be non-negative");
  const double g = gas.gamma;
  const double lead = -(g * a_e / geom.volume);
  StageCoefficients c;
  c.c_one = lead * std::pow(2.0 / (g + 1.0), 1.0 / (g - 1.0)) *
            std::sqrt(2.0 * g * std::pow(init.p01, 1.0 / g) / ((g + 1.0) * init.rho01));
  c.c_two = lead * std::sqrt(2.0 / (g - 1.0)) * init.a01 *
            std::pow(ambient.p_atm / init.p01, (g - 1.0) / (2.0 * g));
  return c;
}

// Everything the forward model needs besides the leak area.
struct BlowdownModel {
  GasModel gas;
  AmbientConditions ambient;
  ChamberGeometry geometry;
  InitialState initial = InitialState::from(2.0 * kStandardAtmosphere, 300.0, GasModel{});

  static BlowdownModel make(const GasModel& gas, const AmbientConditions& ambient,
                            const ChamberGeometry& geom, double p01, double t01) {
    gas.validate();
    ambient.validate();
    geom.validate();
    if (!(p01 > ambient.p_atm)) {
      throw std::invalid_argument("BlowdownModel: initial pressure must exceed ambient pressure");
    }
    BlowdownModel m;
    m.gas = gas;
    m.ambient = ambient;
    m.geometry = geom;
    m.initial = InitialState::from(p01, t01, gas);
    return m;
  }

  static BlowdownModel reference_chamber() { return make({}, {}, {}, 2.0 * kStandardAtmosphere, 300.0); }

  StageCoefficients coefficients(double a_e) const {
    return stage_coefficients(a_e, geometry, initial, gas, ambient);
  }

  double choke_pressure() const { return critical_pressure_ratio(gas) * ambient.p_atm; }

  // Isentropic reservoir density at pressure p0.
  double density_at(double p0) const {
    return initial.rho01 * std::pow(p0 / initial.p01, 1.0 / gas.gamma);
  }
};

inline double exit_mass_flow(double p0, double a_e, const InitialState& init, const GasModel& gas,
                             const AmbientConditions& ambient) {
  constexpr double kTol = 1e-9;
  if (!(a_e >= 0.0)) throw std::domain_error("exit_mass_flow: leak area must be non-negative");
  if (!(p0 >= ambient.p_atm) || !(p0 <= init.p01 * (1.0 + kTol))) {
    throw std::domain_error("exit_mass_flow: pressure outside [p_atm, p01]");
  }
  const double g = gas.gamma;
  switch (stage_of(p0, ambient, gas)) {
    case FlowStage::Equalized:
      return 0.0;
    case FlowStage::Choked:
      return init.rho01 / std::pow(init.p01, 1.0 / g) * std::pow(2.0 / (g + 1.0), 1.0 / (g - 1.0)) *
             a_e * std::sqrt(2.0 * g * std::pow(init.p01, 1.0 / g) / ((g + 1.0) * init.rho01)) *
             std::pow(p0, (g + 1.0) / (2.0 * g));
    case FlowStage::Unchoked: {
      const double rho0 = init.rho01 * std::pow(p0 / init.p01, 1.0 / g);
      const double expansion = 1.0 - std::pow(ambient.p_atm / p0, (g - 1.0) / g);
      const double radicand = 2.0 * g / (g - 1.0) * p0 / rho0 * expansion;
      return init.rho01 * std::pow(ambient.p_atm / init.p01, 1.0 / g) * a_e *
             std::sqrt(radicand > 0.0 ? radicand : 0.0);
    }
  }
  return 0.0;
}

inline double exit_mass_flow(double p0, double a_e, const BlowdownModel& m) {
  return exit_mass_flow(p0, a_e, m.initial, m.gas, m.ambient);
}

inline double dp0_dt(double p0, const StageCoefficients& coeffs, FlowStage stage,
                     const AmbientConditions& ambient, const GasModel& gas) {
  const double g = gas.gamma;
  switch (stage) {
    case FlowStage::Equalized:
      return 0.0;
    case FlowStage::Choked:
      return coeffs.c_one * std::pow(p0, (3.0 * g - 1.0) / (2.0 * g));
    case FlowStage::Unchoked: {
      const double lifted = std::pow(p0 / ambient.p_atm, (g - 1.0) / g);
      const double radicand = lifted - 1.0;
      return ambient.p_atm * coeffs.c_two * lifted * std::sqrt(radicand > 0.0 ? radicand : 0.0);
    }
  }
  return 0.0;
}

// One classical RK4 step. The stage at the start pressure is held for all
// four slopes; the result never drops below p_atm.
inline double rk4_step(double p0, double dt, const StageCoefficients& coeffs, const BlowdownModel& m) {
  const FlowStage stage = stage_of(p0, m.ambient, m.gas);
  if (stage == FlowStage::Equalized) return p0;
  auto slope = [&](double p) { return dp0_dt(p, coeffs, stage, m.ambient, m.gas); };
  const double k1 = slope(p0);
  const double k2 = slope(p0 + 0.5 * dt * k1);
  const double k3 = slope(p0 + 0.5 * dt * k2);
  const double k4 = slope(p0 + dt * k3);
  const double next = p0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return next < m.ambient.p_atm ? m.ambient.p_atm : next;
}

inline double rk4_step(double p0, double dt, double a_e, const BlowdownModel& m) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  return rk4_step(p0, dt, m.coefficients(a_e), m);
}

// Advances pressure from t0 to t1 at constant leak area in equal steps no
// longer than max_dt.
inline double propagate(double p0, double t0, double t1, const StageCoefficients& coeffs,
                        double max_dt, const BlowdownModel& m) {
  const double span = t1 - t0;
  if (!(span > 0.0)) return p0;
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(span / max_dt - 1e-9)));
  const double h = span / static_cast<double>(steps);
  double p = p0;
  for (std::size_t i = 0; i < steps; ++i) p = rk4_step(p, h, coeffs, m);
  return p;
}

inline std::size_t step_count(double t_end, double dt) {
  return static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
}

inline PressureTrajectory integrate_trajectory(double a_e, double t_end, double dt, const BlowdownModel& m) {
  if (!(t_end > 0.0) || !(dt > 0.0)) {
    throw std::invalid_argument("integrate_trajectory: t_end and dt must be positive");
  }
  const StageCoefficients coeffs = m.coefficients(a_e);
  const std::size_t steps = step_count(t_end, dt);
  PressureTrajectory traj;
  traj.leak_area = a_e;
  traj.samples.reserve(steps + 1);
  double p = m.initial.p01;
  traj.samples.push_back({0.0, p});
  for (std::size_t k = 1; k <= steps; ++k) {
    p = rk4_step(p, dt, coeffs, m);
    traj.samples.push_back({static_cast<double>(k) * dt, p});
  }
  return traj;
}

// Closed-form Stage-I pressure from separating dp/dt = C p^n with
// n = (3g-1)/(2g); for air (g = 1.4) this is (p01^(-1/7) - C t / 7)^(-7).
inline double analytic_stage1(double t, const BlowdownModel& m, double c_one) {
  const double n = (3.0 * m.gas.gamma - 1.0) / (2.0 * m.gas.gamma);
  const double base = std::pow(m.initial.p01, 1.0 - n) + (1.0 - n) * c_one * t;
  if (!(base > 0.0)) throw std::domain_error("analytic_stage1: solution left the choked regime");
  const double p = std::pow(base, 1.0 / (1.0 - n));
  if (p < m.choke_pressure()) {
    throw std::domain_error("analytic_stage1: time " + std::to_string(t) + " s is past the choked window");
  }
  return p;
}

}  // namespace ewars
