#pragma once

// Synthetic pressure chamber: piecewise-constant leak schedules, the flow
// controller calibration chain (volts -> slpm -> area) and a noisy 1 kHz
// pressure transducer.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "ewars/estimator.hpp"
#include "ewars/gas_dynamics.hpp"
#include "ewars/units.hpp"

namespace ewars {

struct LeakSegment {
  double start_time = 0.0;  // s
  double area = 0.0;        // m^2
};

struct LeakScenario {
  std::vector<LeakSegment> segments;
  double duration = 0.0;  // s

  void validate() const {
    if (segments.empty()) throw std::invalid_argument("LeakScenario: no segments");
    if (segments.front().start_time != 0.0) throw std::invalid_argument("LeakScenario: first segment must start at 0");
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (!(segments[i].area >= 0.0)) throw std::invalid_argument("LeakScenario: areas must be non-negative");
      if (i > 0 && !(segments[i].start_time > segments[i - 1].start_time)) {
        throw std::invalid_argument("LeakScenario: start times must be strictly increasing");
      }
    }
    if (!(duration > 0.0)) throw std::invalid_argument("LeakScenario: duration must be positive");
  }

  double area_at(double t, double tol = 0.0) const {
    double a = segments.front().area;
    for (const auto& s : segments) {
      if (s.start_time <= t + tol) a = s.area;
    }
    return a;
  }
};

inline LeakScenario scenario_constant(double area, double duration) {
  if (!(area >= 0.0)) throw std::invalid_argument("scenario_constant: area must be non-negative");
  LeakScenario s{{{0.0, area}}, duration};
  s.validate();
  return s;
}

inline LeakScenario scenario_steps(const std::vector<double>& areas, double step_duration) {
  if (areas.empty()) throw std::invalid_argument("scenario_steps: empty area list");
  if (!(step_duration > 0.0)) throw std::invalid_argument("scenario_steps: step_duration must be positive");
  LeakScenario s;
  for (std::size_t i = 0; i < areas.size(); ++i) {
    s.segments.push_back({static_cast<double>(i) * step_duration, areas[i]});
  }
  s.duration = static_cast<double>(areas.size()) * step_duration;
  s.validate();
  return s;
}

struct SensorModel {
  double sample_rate = 1000.0;  // Hz
  double noise_sigma = 100.0;   // Pa
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sample_rate > 0.0)) throw std::invalid_argument("SensorModel: sample_rate must be positive");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("SensorModel: noise_sigma must be non-negative");
  }
};

// Sixth-order fit of controller flow (slpm) against command voltage.
struct CalibrationPolynomial {
  std::array<double, 7> coefficients{0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0};  // c0 + c1 v + ... + c6 v^6
  double v_min = 0.0;
  double v_max = 10.0;
  double operating_max = 6.0;

  double evaluate(double v) const {
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * v + *it;
    return acc;
  }

  // Non-negative and non-decreasing over the operating range, checked densely.
  void validate() const {
    constexpr int kSamples = 6000;
    double prev = evaluate(v_min);
    if (prev < 0.0) throw std::invalid_argument("CalibrationPolynomial: negative flow at 0 V");
    for (int i = 1; i <= kSamples; ++i) {
      const double v = v_min + (operating_max - v_min) * i / kSamples;
      const double q = evaluate(v);
      if (q < 0.0) throw std::invalid_argument("CalibrationPolynomial: negative flow in the operating range");
      if (q < prev - 1e-12 * std::abs(prev)) {
        throw std::invalid_argument("CalibrationPolynomial: flow decreases in the operating range");
      }
      prev = q;
    }
  }
};

inline double volts_to_slpm(double v, const CalibrationPolynomial& cal) {
  if (!(v >= cal.v_min && v <= cal.v_max)) throw std::domain_error("volts_to_slpm: command voltage out of range");
  return cal.evaluate(v);
}

struct StandardConditions {
  double pressure = 101325.0;   // Pa
  double temperature = 293.15;  // K
};

// Volumetric standard flow to the orifice area passing the same mass flow at
// chamber pressure p0.
inline double slpm_to_area(double q, double p0, const BlowdownModel& m, const StandardConditions& std_cond = {}) {
  if (!(q >= 0.0)) throw std::domain_error("slpm_to_area: flow must be non-negative");
  if (!(p0 > m.ambient.p_atm)) throw std::domain_error("slpm_to_area: no flow at or below ambient pressure");
  const double rho_std = density_from_ideal_gas(std_cond.pressure, std_cond.temperature, m.gas);
  const double mdot = q * rho_std / 60000.0;
  return mdot / exit_mass_flow(p0, 1.0, m);
}

struct SimulationResult {
  std::vector<MeasurementSample> measurements;  // noisy
  std::vector<MeasurementSample> truth;         // noise-free
  std::vector<double> true_area;                // m^2, per sample
};

inline SimulationResult simulate(const LeakScenario& scenario, const SensorModel& sensor, const BlowdownModel& m,
                                 double dt = 1e-3) {
  scenario.validate();
  sensor.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
  const double per_sample = 1.0 / (sensor.sample_rate * dt);
  const double stride_f = std::round(per_sample);
  if (per_sample < 1.0 - 1e-9 || std::abs(per_sample - stride_f) > 1e-6) {
    throw std::invalid_argument("simulate: sample period must be an integer multiple of dt");
  }
  const auto stride = static_cast<std::size_t>(stride_f);
  const std::size_t steps = step_count(scenario.duration, dt);

  SimulationResult out;
  out.measurements.reserve(steps / stride + 1);
  out.truth.reserve(steps / stride + 1);
  out.true_area.reserve(steps / stride + 1);

  std::mt19937_64 rng(sensor.seed);
  std::normal_distribution<double> noise(0.0, sensor.noise_sigma > 0.0 ? sensor.noise_sigma : 1.0);
  auto record = [&](double t, double p, double area) {
    out.truth.push_back({t, p});
    out.true_area.push_back(area);
    const double n = sensor.noise_sigma > 0.0 ? noise(rng) : 0.0;
    out.measurements.push_back({t, p + n});
  };

  const double tol = 1e-9 * dt;
  double area = scenario.area_at(0.0, tol);
  StageCoefficients coeffs = m.coefficients(area);
  double p = m.initial.p01;
  record(0.0, p, area);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double start = static_cast<double>(k - 1) * dt;
    const double a = scenario.area_at(start, tol);
    if (a != area) {
      area = a;
      coeffs = m.coefficients(area);
    }
    p = rk4_step(p, dt, coeffs, m);
    if (k % stride == 0) record(static_cast<double>(k) * dt, p, scenario.area_at(static_cast<double>(k) * dt, tol));
  }
  return out;
}

}  // namespace ewars
