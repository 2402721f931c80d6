#pragma once

// File formats: measurement CSV, truth CSV, estimate CSV + run summary,
// calibration polynomial and scenario definition files.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ewars/chamber_sim.hpp"
#include "ewars/estimator.hpp"
#include "ewars/units.hpp"

namespace ewars {

// Exit codes: 2 config, 3 data, 4 IO.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PressureUnit { Pa, Atm };

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Shortest text that parses back to the same double.
inline std::string exact(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string sig6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Measurement CSV: header `time_s,pressure_pa` (or `time_s,pressure_atm`),
// one sample per row, LF line endings.

class MeasurementReader {
 public:
  MeasurementReader(std::istream& in, bool strict) : in_(in), strict_(strict) {}

  const std::vector<std::string>& warnings() const { return warnings_; }

  // Next valid sample; malformed or out-of-order rows are skipped with a
  // warning, or raise DataError in strict mode.
  std::optional<MeasurementSample> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!header_seen_) {
        header_seen_ = true;
        const auto h = detail::trim(line);
        if (h == "time_s,pressure_pa") {
          unit_ = PressureUnit::Pa;
          continue;
        }
        if (h == "time_s,pressure_atm") {
          unit_ = PressureUnit::Atm;
          continue;
        }
        throw DataError("measurement CSV: expected header time_s,pressure_pa or time_s,pressure_atm, got '" +
                        std::string(h) + "'");
      }
      if (detail::trim(line).empty()) continue;
      const auto fields = detail::split(line, ',');
      std::optional<double> t, p;
      if (fields.size() == 2) {
        t = detail::parse_double(fields[0]);
        p = detail::parse_double(fields[1]);
      }
      if (!t || !p || !(*p > 0.0)) {
        reject("malformed row");
        continue;
      }
      MeasurementSample s{*t, unit_ == PressureUnit::Atm ? atm_to_pa(*p) : *p};
      if (last_time_ && !(s.time > *last_time_)) {
        reject("non-increasing timestamp");
        continue;
      }
      last_time_ = s.time;
      return s;
    }
    if (!header_seen_) throw DataError("measurement CSV: missing header");
    return std::nullopt;
  }

 private:
  void reject(const char* why) {
    const std::string msg = "line " + std::to_string(line_no_) + ": " + why + ", row skipped";
    if (strict_) throw DataError(msg);
    warnings_.push_back(msg);
  }

  std::istream& in_;
  bool strict_;
  bool header_seen_ = false;
  PressureUnit unit_ = PressureUnit::Pa;
  std::size_t line_no_ = 0;
  std::optional<double> last_time_;
  std::vector<std::string> warnings_;
};

inline std::vector<MeasurementSample> ingest_measurements(std::istream& in, bool strict = false,
                                                          std::vector<std::string>* warnings = nullptr) {
  MeasurementReader reader(in, strict);
  std::vector<MeasurementSample> out;
  while (auto s = reader.next()) out.push_back(*s);
  if (warnings) *warnings = reader.warnings();
  return out;
}

inline std::vector<MeasurementSample> ingest_measurements(const std::string& path, bool strict = false,
                                                          std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open measurement file '" + path + "'");
  return ingest_measurements(in, strict, warnings);
}

inline void write_measurements(std::ostream& out, std::span<const MeasurementSample> samples,
                               PressureUnit unit = PressureUnit::Pa) {
  out << (unit == PressureUnit::Pa ? "time_s,pressure_pa\n" : "time_s,pressure_atm\n");
  for (const auto& s : samples) {
    out << detail::exact(s.time) << ',' << detail::exact(unit == PressureUnit::Pa ? s.pressure : pa_to_atm(s.pressure))
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Truth CSV: `time_s,pressure_pa,area_mm2`, the noise-free stream and the
// commanded leak area per sample.

struct TruthSeries {
  std::vector<MeasurementSample> pressure;
  std::vector<double> area;  // m^2

  bool empty() const { return pressure.empty(); }

  // Commanded area at the latest truth sample at or before t.
  double area_at(double t) const {
    const auto it = std::upper_bound(pressure.begin(), pressure.end(), t + 1e-9,
                                     [](double v, const MeasurementSample& s) { return v < s.time; });
    if (it == pressure.begin()) return area.front();
    return area[static_cast<std::size_t>(it - pressure.begin()) - 1];
  }
};

inline void write_truth(std::ostream& out, const SimulationResult& sim) {
  out << "time_s,pressure_pa,area_mm2\n";
  for (std::size_t i = 0; i < sim.truth.size(); ++i) {
    out << detail::exact(sim.truth[i].time) << ',' << detail::exact(sim.truth[i].pressure) << ','
        << detail::exact(m2_to_mm2(sim.true_area[i])) << '\n';
  }
}

inline TruthSeries read_truth(std::istream& in) {
  TruthSeries ts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (detail::trim(line) != "time_s,pressure_pa,area_mm2") {
        throw DataError("truth CSV: expected header time_s,pressure_pa,area_mm2");
      }
      continue;
    }
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, ',');
    std::optional<double> t, p, a;
    if (f.size() == 3) {
      t = detail::parse_double(f[0]);
      p = detail::parse_double(f[1]);
      a = detail::parse_double(f[2]);
    }
    if (!t || !p || !a) throw DataError("truth CSV line " + std::to_string(line_no) + ": malformed row");
    ts.pressure.push_back({*t, *p});
    ts.area.push_back(mm2_to_m2(*a));
  }
  return ts;
}

inline TruthSeries read_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open truth file '" + path + "'");
  return read_truth(in);
}

// ---------------------------------------------------------------------------
// Estimate CSV: `time_s,area_mm2_est,area_mm2_true,evals,smoothed_obj`.

inline const char* kEstimateHeader = "time_s,area_mm2_est,area_mm2_true,evals,smoothed_obj\n";

inline std::string estimate_row(const EstimateRecord& r, const TruthSeries* truth) {
  std::string row = detail::exact(r.time);
  row += ',';
  row += detail::sig6(m2_to_mm2(r.area_estimate));
  row += ',';
  if (truth && !truth->empty()) row += detail::sig6(m2_to_mm2(truth->area_at(r.time)));
  row += ',';
  row += std::to_string(r.evaluations);
  row += ',';
  row += detail::sig6(r.smoothed_objective_at_min);
  row += '\n';
  return row;
}

// Free-running model from (0, p01) driven by a piecewise-constant area
// schedule, compared against measurements: mean |model - measured| / measured
// in percent.
template <class AreaAt>
double free_run_mape(std::span<const MeasurementSample> measured, AreaAt&& area_at, const BlowdownModel& m,
                     double max_dt = 1e-3) {
  if (measured.empty()) return 0.0;
  double t = 0.0;
  double p = m.initial.p01;
  double acc = 0.0;
  for (const auto& s : measured) {
    if (s.time > t) {
      p = propagate(p, t, s.time, m.coefficients(area_at(t)), max_dt, m);
      t = s.time;
    }
    acc += std::abs(p - s.pressure) / s.pressure;
  }
  return 100.0 * acc / static_cast<double>(measured.size());
}

// Area schedule read off an estimate series: the latest estimate at or before
// t, the first estimate before the series starts.
inline double estimate_at(std::span<const EstimateRecord> recs, double t) {
  const auto it = std::upper_bound(recs.begin(), recs.end(), t,
                                   [](double v, const EstimateRecord& r) { return v < r.time; });
  if (it == recs.begin()) return recs.front().area_estimate;
  return std::prev(it)->area_estimate;
}

struct RunSummary {
  std::size_t updates = 0;
  double converged_estimate = 0.0;  // m^2
  double convergence_time = 0.0;    // s
  std::size_t total_evaluations = 0;
  double mape_percent = 0.0;
  std::optional<double> final_true_area;  // m^2
};

// Convergence time: first record time after which every estimate stays within
// 2% of the final estimate.
inline double convergence_time(std::span<const EstimateRecord> recs) {
  if (recs.empty()) return 0.0;
  const double final_est = recs.back().area_estimate;
  std::size_t first = recs.size() - 1;
  for (std::size_t i = recs.size(); i-- > 0;) {
    if (std::abs(recs[i].area_estimate - final_est) > 0.02 * final_est) break;
    first = i;
  }
  return recs[first].time;
}

inline RunSummary summarize(std::span<const EstimateRecord> recs, std::span<const MeasurementSample> measured,
                            const BlowdownModel& m, const TruthSeries* truth) {
  RunSummary s;
  s.updates = recs.size();
  if (recs.empty()) return s;
  s.converged_estimate = recs.back().area_estimate;
  s.convergence_time = convergence_time(recs);
  for (const auto& r : recs) s.total_evaluations += r.evaluations;
  s.mape_percent = free_run_mape(measured, [&](double t) { return estimate_at(recs, t); }, m);
  if (truth && !truth->empty()) s.final_true_area = truth->area_at(recs.back().time);
  return s;
}

inline void write_summary(std::ostream& out, const RunSummary& s) {
  out << "updates = " << s.updates << '\n';
  out << "converged_area_mm2 = " << detail::sig6(m2_to_mm2(s.converged_estimate)) << '\n';
  out << "convergence_time_s = " << detail::sig6(s.convergence_time) << '\n';
  out << "total_evaluations = " << s.total_evaluations << '\n';
  out << "pressure_mape_percent = " << detail::sig6(s.mape_percent) << '\n';
  if (s.final_true_area) out << "true_area_mm2 = " << detail::sig6(m2_to_mm2(*s.final_true_area)) << '\n';
}

// ---------------------------------------------------------------------------
// Calibration file: seven coefficients c0..c6 (volts -> slpm), separated by
// whitespace or commas; '#' starts a comment.

inline CalibrationPolynomial read_calibration(std::istream& in) {
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = detail::strip_comment(line);
    std::replace(body.begin(), body.end(), ',', ' ');
    std::istringstream ss(body);
    std::string tok;
    while (ss >> tok) {
      const auto v = detail::parse_double(tok);
      if (!v) throw ConfigError("calibration line " + std::to_string(line_no) + ": bad number '" + tok + "'");
      values.push_back(*v);
    }
  }
  if (values.size() != 7) {
    throw ConfigError("calibration: expected 7 coefficients, got " + std::to_string(values.size()));
  }
  CalibrationPolynomial cal;
  std::copy(values.begin(), values.end(), cal.coefficients.begin());
  try {
    cal.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("calibration: ") + e.what());
  }
  return cal;
}

// Scenario file: header `start_time_s,area_mm2` or `start_time_s,volts`, one
// segment per row. Voltages go through the calibration chain at p01.
inline LeakScenario read_scenario(std::istream& in, double duration, const BlowdownModel& m,
                                  const CalibrationPolynomial& cal, const StandardConditions& std_cond) {
  LeakScenario sc;
  sc.duration = duration;
  std::string line;
  std::size_t line_no = 0;
  bool volts = false;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = detail::strip_comment(line);
    const auto t = detail::trim(body);
    if (t.empty()) continue;
    if (!header) {
      if (t == "start_time_s,area_mm2") {
        volts = false;
      } else if (t == "start_time_s,volts") {
        volts = true;
      } else {
        throw ConfigError("scenario line " + std::to_string(line_no) +
                          ": expected header start_time_s,area_mm2 or start_time_s,volts");
      }
      header = true;
      continue;
    }
    const auto f = detail::split(t, ',');
    std::optional<double> st, v;
    if (f.size() == 2) {
      st = detail::parse_double(f[0]);
      v = detail::parse_double(f[1]);
    }
    if (!st || !v) throw ConfigError("scenario line " + std::to_string(line_no) + ": malformed row");
    double area = 0.0;
    try {
      area = volts ? slpm_to_area(volts_to_slpm(*v, cal), m.initial.p01, m, std_cond) : mm2_to_m2(*v);
    } catch (const std::domain_error& e) {
      throw ConfigError("scenario line " + std::to_string(line_no) + ": " + e.what());
    }
    sc.segments.push_back({*st, area});
  }
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  return sc;
}

}  // namespace ewars
