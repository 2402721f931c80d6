#pragma once

// Run configuration: flat `key = value` text, '#' comments, unit suffixes in
// key names. Unknown keys are rejected. `preset` fills n_grid and alpha; keys
// given explicitly win regardless of order.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ewars/chamber_sim.hpp"
#include "ewars/estimator.hpp"
#include "ewars/gas_dynamics.hpp"
#include "ewars/io.hpp"
#include "ewars/units.hpp"

namespace ewars {

enum class ScenarioKind { Constant, Steps, File };

struct RunConfig {
  // physics
  GasModel gas;
  AmbientConditions ambient;
  ChamberGeometry geometry;
  double p01 = 2.0 * kStandardAtmosphere;
  double t01 = 300.0;

  EwarsConfig ewars = EwarsConfig::constant_leak();
  std::string preset = "constant";

  // scenario and sensor
  ScenarioKind scenario = ScenarioKind::Constant;
  double leak_area = mm2_to_m2(0.22);
  std::vector<double> leak_areas{mm2_to_m2(0.08), mm2_to_m2(0.12), mm2_to_m2(0.16)};
  double step_duration = 180.0;
  double duration = 300.0;
  std::string scenario_file;
  SensorModel sensor;
  double integrator_dt = 1e-3;

  // flow-controller calibration chain
  std::string calibration_file;
  StandardConditions std_conditions;

  // io
  std::string input;
  std::string output;
  std::string truth_file;
  PressureUnit pressure_unit = PressureUnit::Pa;
  bool strict = false;
  int fbfs_n0 = 0;  // 0: match epsilon

  BlowdownModel model() const { return BlowdownModel::make(gas, ambient, geometry, p01, t01); }

  CalibrationPolynomial calibration() const {
    if (calibration_file.empty()) return {};
    std::ifstream in(calibration_file);
    if (!in) throw ConfigError("cannot open calibration file '" + calibration_file + "'");
    return read_calibration(in);
  }

  LeakScenario make_scenario() const {
    switch (scenario) {
      case ScenarioKind::Constant:
        return scenario_constant(leak_area, duration);
      case ScenarioKind::Steps:
        return scenario_steps(leak_areas, step_duration);
      case ScenarioKind::File: {
        std::ifstream in(scenario_file);
        if (!in) throw ConfigError("cannot open scenario file '" + scenario_file + "'");
        return read_scenario(in, duration, model(), calibration(), std_conditions);
      }
    }
    return {};
  }

  int resolved_fbfs_n0() const {
    return fbfs_n0 > 0 ? fbfs_n0 : resolution_matched_grid(ewars.bounds, ewars.epsilon);
  }
};

namespace detail {

inline double to_double(const std::string& v) {
  const auto d = parse_double(v);
  if (!d) throw std::invalid_argument("expected a number, got '" + v + "'");
  return *d;
}

inline int to_int(const std::string& v) {
  const double d = to_double(v);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw std::invalid_argument("expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

inline bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true/false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"gamma", [](RunConfig& c, const std::string& v) { c.gas.gamma = to_double(v); }},
      {"r_specific_j_per_kg_k", [](RunConfig& c, const std::string& v) { c.gas.r_specific = to_double(v); }},
      {"p_atm_pa", [](RunConfig& c, const std::string& v) { c.ambient.p_atm = to_double(v); }},
      {"p01_pa", [](RunConfig& c, const std::string& v) { c.p01 = to_double(v); }},
      {"t01_k", [](RunConfig& c, const std::string& v) { c.t01 = to_double(v); }},
      {"volume_m3", [](RunConfig& c, const std::string& v) { c.geometry.volume = to_double(v); }},
      {"alpha", [](RunConfig& c, const std::string& v) { c.ewars.alpha = to_double(v); }},
      {"epsilon_mm2", [](RunConfig& c, const std::string& v) { c.ewars.epsilon = mm2_to_m2(to_double(v)); }},
      {"n_grid", [](RunConfig& c, const std::string& v) { c.ewars.n_grid = to_int(v); }},
      {"a_lb_mm2", [](RunConfig& c, const std::string& v) { c.ewars.bounds.a_lb = mm2_to_m2(to_double(v)); }},
      {"a_ub_mm2", [](RunConfig& c, const std::string& v) { c.ewars.bounds.a_ub = mm2_to_m2(to_double(v)); }},
      {"update_interval_s", [](RunConfig& c, const std::string& v) { c.ewars.update_interval = to_double(v); }},
      {"model_dt_s", [](RunConfig& c, const std::string& v) { c.ewars.model_dt = to_double(v); }},
      {"weight_floor", [](RunConfig& c, const std::string& v) { c.ewars.weight_floor = to_double(v); }},
      {"anchor",
       [](RunConfig& c, const std::string& v) {
         if (v == "previous") {
           c.ewars.anchor_mode = AnchorMode::PreviousMeasurement;
         } else if (v == "initial") {
           c.ewars.anchor_mode = AnchorMode::InitialCondition;
         } else {
           throw std::invalid_argument("expected previous|initial, got '" + v + "'");
         }
       }},
      {"refine",
       [](RunConfig& c, const std::string& v) {
         if (v == "replay") {
           c.ewars.refine_strategy = RefineStrategy::Replay;
         } else if (v == "interpolate") {
           c.ewars.refine_strategy = RefineStrategy::Interpolate;
         } else {
           throw std::invalid_argument("expected replay|interpolate, got '" + v + "'");
         }
       }},
      {"decimation",
       [](RunConfig& c, const std::string& v) {
         if (v == "mean") {
           c.ewars.decimation = DecimationMode::BlockMean;
         } else if (v == "nearest") {
           c.ewars.decimation = DecimationMode::Nearest;
         } else {
           throw std::invalid_argument("expected mean|nearest, got '" + v + "'");
         }
       }},
      {"scenario",
       [](RunConfig& c, const std::string& v) {
         if (v == "constant") {
           c.scenario = ScenarioKind::Constant;
         } else if (v == "steps") {
           c.scenario = ScenarioKind::Steps;
         } else if (v == "file") {
           c.scenario = ScenarioKind::File;
         } else {
           throw std::invalid_argument("expected constant|steps|file, got '" + v + "'");
         }
       }},
      {"leak_area_mm2", [](RunConfig& c, const std::string& v) { c.leak_area = mm2_to_m2(to_double(v)); }},
      {"leak_areas_mm2",
       [](RunConfig& c, const std::string& v) {
         c.leak_areas.clear();
         for (auto f : split(v, ',')) c.leak_areas.push_back(mm2_to_m2(to_double(std::string(f))));
       }},
      {"step_duration_s", [](RunConfig& c, const std::string& v) { c.step_duration = to_double(v); }},
      {"duration_s", [](RunConfig& c, const std::string& v) { c.duration = to_double(v); }},
      {"scenario_file", [](RunConfig& c, const std::string& v) { c.scenario_file = v; }},
      {"sample_rate_hz", [](RunConfig& c, const std::string& v) { c.sensor.sample_rate = to_double(v); }},
      {"noise_sigma_pa", [](RunConfig& c, const std::string& v) { c.sensor.noise_sigma = to_double(v); }},
      {"seed",
       [](RunConfig& c, const std::string& v) {
         const double d = to_double(v);
         if (d < 0 || d != std::floor(d)) throw std::invalid_argument("expected a non-negative integer");
         c.sensor.seed = static_cast<std::uint64_t>(d);
       }},
      {"integrator_dt_s", [](RunConfig& c, const std::string& v) { c.integrator_dt = to_double(v); }},
      {"calibration_file", [](RunConfig& c, const std::string& v) { c.calibration_file = v; }},
      {"std_pressure_pa", [](RunConfig& c, const std::string& v) { c.std_conditions.pressure = to_double(v); }},
      {"std_temperature_k", [](RunConfig& c, const std::string& v) { c.std_conditions.temperature = to_double(v); }},
      {"input", [](RunConfig& c, const std::string& v) { c.input = v; }},
      {"output", [](RunConfig& c, const std::string& v) { c.output = v; }},
      {"truth_file", [](RunConfig& c, const std::string& v) { c.truth_file = v; }},
      {"pressure_unit",
       [](RunConfig& c, const std::string& v) {
         if (v == "pa") {
           c.pressure_unit = PressureUnit::Pa;
         } else if (v == "atm") {
           c.pressure_unit = PressureUnit::Atm;
         } else {
           throw std::invalid_argument("expected pa|atm, got '" + v + "'");
         }
       }},
      {"strict", [](RunConfig& c, const std::string& v) { c.strict = to_bool(v); }},
      {"fbfs_n0", [](RunConfig& c, const std::string& v) { c.fbfs_n0 = to_int(v); }},
  };
  return table;
}

inline void apply_preset(RunConfig& c, const std::string& name) {
  EwarsConfig p;
  if (name == "constant") {
    p = EwarsConfig::constant_leak();
  } else if (name == "variable") {
    p = EwarsConfig::variable_leak();
  } else {
    throw std::invalid_argument("expected constant|variable, got '" + name + "'");
  }
  c.preset = name;
  c.ewars.n_grid = p.n_grid;
  c.ewars.alpha = p.alpha;
}

}  // namespace detail

// Ordered key/value assignments with the line each came from (0 for flags).
class ConfigBuilder {
 public:
  void set(const std::string& key, const std::string& value, std::size_t line = 0) {
    if (key != "preset" && !detail::setters().count(key)) {
      throw ConfigError(where(line) + "unknown key '" + key + "'");
    }
    entries_[key] = {value, line};
  }

  void parse(std::istream& in) {
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string body = detail::strip_comment(raw);
      const auto t = detail::trim(body);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string_view::npos) throw ConfigError(where(line_no) + "expected 'key = value'");
      const std::string key(detail::trim(t.substr(0, eq)));
      const std::string value(detail::trim(t.substr(eq + 1)));
      if (key.empty()) throw ConfigError(where(line_no) + "missing key");
      set(key, value, line_no);
    }
  }

  RunConfig build() const {
    RunConfig c;
    if (auto it = entries_.find("preset"); it != entries_.end()) {
      apply(c, it->first, it->second, [&](RunConfig& cc, const std::string& v) { detail::apply_preset(cc, v); });
    }
    for (const auto& [key, e] : entries_) {
      if (key == "preset") continue;
      apply(c, key, e, detail::setters().at(key));
    }
    validate(c);
    return c;
  }

 private:
  struct Entry {
    std::string value;
    std::size_t line;
  };

  static std::string where(std::size_t line) {
    return line == 0 ? std::string("config: ") : "config line " + std::to_string(line) + ": ";
  }

  template <class Fn>
  void apply(RunConfig& c, const std::string& key, const Entry& e, Fn&& fn) const {
    try {
      fn(c, e.value);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(where(e.line) + key + ": " + ex.what());
    }
  }

  void validate(const RunConfig& c) const {
    auto check = [&](bool ok, const char* key, const std::string& msg) {
      if (ok) return;
      const auto it = entries_.find(key);
      throw ConfigError(where(it == entries_.end() ? 0 : it->second.line) + key + ": " + msg);
    };
    check(c.gas.gamma > 1.0, "gamma", "must exceed 1");
    check(c.gas.r_specific > 0.0, "r_specific_j_per_kg_k", "must be positive");
    check(c.ambient.p_atm > 0.0, "p_atm_pa", "must be positive");
    check(c.p01 > c.ambient.p_atm, "p01_pa", "must exceed p_atm_pa");
    check(c.t01 > 0.0, "t01_k", "must be positive");
    check(c.geometry.volume > 0.0, "volume_m3", "must be positive");
    check(c.ewars.alpha >= 0.0 && c.ewars.alpha <= 1.0, "alpha", "must lie in [0, 1]");
    check(c.ewars.epsilon > 0.0, "epsilon_mm2", "must be positive");
    check(c.ewars.n_grid >= 3, "n_grid", "must be at least 3");
    check(c.ewars.bounds.a_lb > 0.0, "a_lb_mm2", "must be positive");
    check(c.ewars.bounds.a_ub > c.ewars.bounds.a_lb, "a_ub_mm2", "must exceed a_lb_mm2");
    check(c.ewars.update_interval > 0.0, "update_interval_s", "must be positive");
    check(c.ewars.model_dt > 0.0, "model_dt_s", "must be positive");
    check(c.ewars.weight_floor > 0.0 && c.ewars.weight_floor < 1.0, "weight_floor", "must lie in (0, 1)");
    check(c.leak_area >= 0.0, "leak_area_mm2", "must be non-negative");
    check(!c.leak_areas.empty(), "leak_areas_mm2", "must not be empty");
    for (double a : c.leak_areas) check(a >= 0.0, "leak_areas_mm2", "must be non-negative");
    check(c.step_duration > 0.0, "step_duration_s", "must be positive");
    check(c.duration > 0.0, "duration_s", "must be positive");
    check(c.sensor.sample_rate > 0.0, "sample_rate_hz", "must be positive");
    check(c.sensor.noise_sigma >= 0.0, "noise_sigma_pa", "must be non-negative");
    check(c.integrator_dt > 0.0 && c.integrator_dt <= 1.0 / c.sensor.sample_rate, "integrator_dt_s",
          "must be positive and no longer than the sample period");
    check(c.std_conditions.pressure > 0.0, "std_pressure_pa", "must be positive");
    check(c.std_conditions.temperature > 0.0, "std_temperature_k", "must be positive");
    check(c.fbfs_n0 >= 0, "fbfs_n0", "must be non-negative");
    check(c.scenario != ScenarioKind::File || !c.scenario_file.empty(), "scenario_file",
          "required when scenario = file");
    for (const char* key : {"scenario_file", "calibration_file", "input", "truth_file"}) {
      const auto it = entries_.find(key);
      if (it == entries_.end() || it->second.value == "-") continue;
      check(std::ifstream(it->second.value).good(), key, "file '" + it->second.value + "' does not exist");
    }
  }

  std::map<std::string, Entry> entries_;
};

inline RunConfig load_config(std::istream& in) {
  ConfigBuilder b;
  b.parse(in);
  return b.build();
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return load_config(in);
}

}  // namespace ewars
