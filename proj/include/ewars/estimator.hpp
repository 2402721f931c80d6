#pragma once

// Streaming leak-area estimation: squared one-sample misfit between the
// blowdown model and measured pressure, exponentially weighted over time and
// minimized by adaptively refined grid search at every update.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ewars/gas_dynamics.hpp"
#include "ewars/search.hpp"
#include "ewars/units.hpp"

namespace ewars {

enum class AnchorMode { PreviousMeasurement, InitialCondition };
enum class RefineStrategy { Replay, Interpolate };
enum class DecimationMode { Nearest, BlockMean };

struct EwarsConfig {
  double alpha = 0.125;
  double epsilon = mm2_to_m2(5e-5);
  int n_grid = 150;
  SearchBounds bounds;
  double update_interval = 0.1;  // s
  AnchorMode anchor_mode = AnchorMode::PreviousMeasurement;
  RefineStrategy refine_strategy = RefineStrategy::Replay;
  double weight_floor = 1e-9;
  double model_dt = 0.1;  // longest RK4 step of the estimator's forward model, s
  DecimationMode decimation = DecimationMode::BlockMean;

  static EwarsConfig constant_leak() { return {}; }

  static EwarsConfig variable_leak() {
    EwarsConfig c;
    c.n_grid = 250;
    c.alpha = 0.01;
    return c;
  }

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("EwarsConfig: alpha must lie in [0, 1]");
    if (!(epsilon > 0.0)) throw std::invalid_argument("EwarsConfig: epsilon must be positive");
    if (n_grid < 3) throw std::invalid_argument("EwarsConfig: n_grid must be at least 3");
    if (!(weight_floor > 0.0 && weight_floor < 1.0)) {
      throw std::invalid_argument("EwarsConfig: weight_floor must lie in (0, 1)");
    }
    if (!(update_interval > 0.0)) throw std::invalid_argument("EwarsConfig: update_interval must be positive");
    if (!(model_dt > 0.0)) throw std::invalid_argument("EwarsConfig: model_dt must be positive");
    bounds.validate();
  }

  // Steps of history whose weight alpha (1 - alpha)^k stays at or above the
  // floor. Zero for alpha = 1; alpha = 0 never forgets and is handled apart.
  std::size_t history_depth() const {
    if (alpha >= 1.0 || alpha <= 0.0) return 0;
    const double k = std::log(weight_floor / alpha) / std::log(1.0 - alpha);
    return k <= 0.0 ? 0 : static_cast<std::size_t>(std::ceil(k));
  }
};

struct MeasurementSample {
  double time = 0.0;      // s
  double pressure = 0.0;  // Pa
};

struct EstimateRecord {
  double time = 0.0;
  double area_estimate = 0.0;  // m^2
  double smoothed_objective_at_min = 0.0;  // Pa^2
  std::size_t evaluations = 0;
  int refinement_levels = 0;
};

struct SmoothedObjective {
  std::vector<double> grid;      // m^2
  std::vector<double> s_values;  // Pa^2
  double last_update_time = 0.0;
};

inline double ew_update(double s_prev, double f_t, double alpha) { return alpha * f_t + (1.0 - alpha) * s_prev; }

// Forward model used by the estimator. Coefficients are built by scaling the
// unit-area coefficients, so every caller sees bit-identical predictions.
class ForwardModel {
 public:
  ForwardModel(const BlowdownModel& model, double model_dt)
      : model_(model), unit_(model.coefficients(1.0)), model_dt_(model_dt) {}

  const BlowdownModel& model() const { return model_; }

  double clamp_anchor(double p) const { return p < model_.ambient.p_atm ? model_.ambient.p_atm : p; }

  // Pressure at t1 starting from (t0, p0) with constant leak area.
  double advance(double a_e, double t0, double p0, double t1) const {
    return propagate(p0, t0, t1, scaled(unit_, a_e), model_dt_, model_);
  }

 private:
  BlowdownModel model_;
  StageCoefficients unit_;
  double model_dt_;
};

inline double model_pressure(double a_e, const MeasurementSample& prev, double now_time, const EwarsConfig& config,
                             const BlowdownModel& model) {
  const ForwardModel fm(model, config.model_dt);
  if (config.anchor_mode == AnchorMode::InitialCondition) {
    return fm.advance(a_e, 0.0, model.initial.p01, now_time);
  }
  if (!(now_time > prev.time)) throw std::invalid_argument("model_pressure: now_time must follow the anchor time");
  return fm.advance(a_e, prev.time, fm.clamp_anchor(prev.pressure), now_time);
}

inline double objective(double a_e, const MeasurementSample& prev, const MeasurementSample& current,
                        const EwarsConfig& config, const BlowdownModel& model) {
  const double r = model_pressure(a_e, prev, current.time, config, model) - current.pressure;
  return r * r;
}

// EWARS state machine. One instance consumes one ordered stream.
//
// S_t lives on a persistent base grid spanning the full bounds. Refinement
// candidates obtain S_t either by replaying the retained history (Replay) or
// by linear interpolation of the base grid (Interpolate). Replayed values are
// memoized per candidate and caught up incrementally when the same candidate
// is requested again within the history window.
class EwarsEstimator {
 public:
  EwarsEstimator(const EwarsConfig& config, const BlowdownModel& model)
      : config_(config), forward_(model, config.model_dt), depth_(config.history_depth()) {
    config_.validate();
    base_grid_ = uniform_grid(config_.bounds.a_lb, config_.bounds.a_ub, config_.n_grid);
    base_.resize(base_grid_.size());
  }

  const EwarsConfig& config() const { return config_; }
  std::size_t steps() const { return steps_; }
  std::size_t anchor_clamps() const { return anchor_clamps_; }
  // Objective evaluations spent on history entries older than the current step.
  std::size_t replay_evaluations() const { return replay_evaluations_; }

  // Consumes one decimated sample. The first sample only anchors the stream.
  std::optional<EstimateRecord> push(const MeasurementSample& sample) {
    if (!anchor_) {
      if (!(sample.pressure > 0.0)) throw std::invalid_argument("EwarsEstimator: pressure must be positive");
      anchor_ = sample;
      return std::nullopt;
    }
    EstimateRecord rec = step(*anchor_, sample);
    anchor_ = sample;
    return rec;
  }

  // One EWARS update from the interval (prev, current]. Throws without
  // touching state when the timestamps are out of order.
  EstimateRecord step(const MeasurementSample& prev, const MeasurementSample& current) {
    if (!(current.time > prev.time) || (steps_ > 0 && !(current.time > last_time_))) {
      throw std::invalid_argument("EwarsEstimator: out-of-order sample at t = " + std::to_string(current.time));
    }
    if (!(current.pressure > 0.0) || !(prev.pressure > 0.0)) {
      throw std::invalid_argument("EwarsEstimator: pressure must be positive");
    }

    HistoryEntry entry{prev.time, prev.pressure, current.time, current.pressure};
    if (config_.anchor_mode == AnchorMode::PreviousMeasurement) {
      const double clamped = forward_.clamp_anchor(prev.pressure);
      if (clamped != prev.pressure) ++anchor_clamps_;
      entry.prev_pressure = clamped;
    }
    const std::size_t n = steps_;
    history_.push_back(entry);
    if (n == 0) first_entry_ = entry;
    while (history_.size() > depth_ + 1) history_.pop_front();

    for (std::size_t i = 0; i < base_grid_.size(); ++i) advance_track(base_[i], base_grid_[i], n);

    const SearchResult r = ars_grid(
        [&](std::span<const double> grid, std::span<double> values, int level) {
          if (level == 0) {
            for (std::size_t i = 0; i < grid.size(); ++i) values[i] = base_[i].s;
            return;
          }
          for (std::size_t i = 0; i < grid.size(); ++i) values[i] = smoothed_at(grid[i], n);
        },
        config_.bounds, config_.n_grid, config_.epsilon);

    steps_ = n + 1;
    last_time_ = current.time;
    if (steps_ % 64 == 0) evict_stale(n);

    EstimateRecord rec;
    rec.time = current.time;
    rec.area_estimate = r.argmin;
    rec.smoothed_objective_at_min = r.value;
    rec.evaluations = r.evaluations;
    rec.refinement_levels = r.levels;
    return rec;
  }

  SmoothedObjective smoothed() const {
    SmoothedObjective so;
    so.grid = base_grid_;
    so.s_values.reserve(base_.size());
    for (const auto& t : base_) so.s_values.push_back(t.s);
    so.last_update_time = last_time_;
    return so;
  }

  // Per-step objective F_t at the most recent update.
  double latest_objective(double a_e) const {
    if (history_.empty()) throw std::logic_error("EwarsEstimator: no update yet");
    Track t;
    t.model_time = 0.0;
    t.model_pressure = forward_.model().initial.p01;
    return objective_at(a_e, history_.back(), t);
  }

 private:
  struct HistoryEntry {
    double prev_time;
    double prev_pressure;
    double time;
    double pressure;
  };

  struct Track {
    double s = 0.0;
    std::size_t step = 0;  // index of the last F folded into s
    bool live = false;
    double model_time = 0.0;  // InitialCondition mode: free-run model state
    double model_pressure = 0.0;
  };

  // F at one history entry. In InitialCondition mode the track's free-running
  // model state is advanced to the entry time.
  double objective_at(double a_e, const HistoryEntry& e, Track& t) const {
    double predicted;
    if (config_.anchor_mode == AnchorMode::PreviousMeasurement) {
      predicted = forward_.advance(a_e, e.prev_time, e.prev_pressure, e.time);
    } else {
      t.model_pressure = forward_.advance(a_e, t.model_time, t.model_pressure, e.time);
      t.model_time = e.time;
      predicted = t.model_pressure;
    }
    const double r = predicted - e.pressure;
    return r * r;
  }

  const HistoryEntry& entry(std::size_t index) const {
    // history_ holds entries [steps_+1 - size, steps_] during a step
    const std::size_t newest = steps_;
    return history_[history_.size() - 1 - (newest - index)];
  }

  void reset_model(Track& t) const {
    t.model_time = 0.0;
    t.model_pressure = forward_.model().initial.p01;
  }

  // Brings a track up to step n, replaying from history when it is stale.
  void advance_track(Track& t, double a_e, std::size_t n) {
    const double a = config_.alpha;
    if (t.live && t.step + 1 == n) {
      t.s = ew_update(t.s, objective_at(a_e, history_.back(), t), a);
      t.step = n;
      return;
    }
    if (t.live && t.step < n && n - t.step <= depth_) {
      for (std::size_t i = t.step + 1; i <= n; ++i) {
        t.s = ew_update(t.s, objective_at(a_e, entry(i), t), a);
        if (i < n) ++replay_evaluations_;
      }
      t.step = n;
      return;
    }
    replay(t, a_e, n);
  }

  void replay(Track& t, double a_e, std::size_t n) {
    reset_model(t);
    t.live = true;
    t.step = n;
    if (config_.alpha <= 0.0) {
      t.s = objective_at(a_e, first_entry_, t);
      if (n > 0) ++replay_evaluations_;
      // the free-run state is only meaningful up to the newest entry
      reset_model(t);
      if (config_.anchor_mode == AnchorMode::InitialCondition) objective_at(a_e, history_.back(), t);
      return;
    }
    const std::size_t span = std::min(n, depth_);
    t.s = objective_at(a_e, entry(n - span), t);
    for (std::size_t i = n - span + 1; i <= n; ++i) {
      t.s = ew_update(t.s, objective_at(a_e, entry(i), t), config_.alpha);
    }
    replay_evaluations_ += span;
  }

  double smoothed_at(double a_e, std::size_t n) {
    if (config_.refine_strategy == RefineStrategy::Interpolate) return interpolate_base(a_e);
    Track& t = cache_[std::bit_cast<std::uint64_t>(a_e)];
    advance_track(t, a_e, n);
    return t.s;
  }

  double interpolate_base(double a_e) const {
    const double lb = config_.bounds.a_lb;
    const double delta = (config_.bounds.a_ub - lb) / config_.n_grid;
    double pos = (a_e - lb) / delta;
    if (pos <= 0.0) return base_.front().s;
    if (pos >= config_.n_grid) return base_.back().s;
    const auto i = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * base_[i].s + w * base_[i + 1].s;
  }

  void evict_stale(std::size_t n) {
    for (auto it = cache_.begin(); it != cache_.end();) {
      if (n - it->second.step > depth_) {
        it = cache_.erase(it);
      } else {
        ++it;
      }
    }
  }

  EwarsConfig config_;
  ForwardModel forward_;
  std::size_t depth_;
  std::vector<double> base_grid_;
  std::vector<Track> base_;
  std::unordered_map<std::uint64_t, Track> cache_;
  std::deque<HistoryEntry> history_;
  HistoryEntry first_entry_{};
  std::optional<MeasurementSample> anchor_;
  std::size_t steps_ = 0;
  double last_time_ = 0.0;
  std::size_t anchor_clamps_ = 0;
  std::size_t replay_evaluations_ = 0;
};

// Reduces a raw stream to one sample per update interval. Update times are
// first_sample_time + k * interval.
//   Nearest:   at each update time, the most recent sample at or before it.
//   BlockMean: the mean (time, pressure) of all samples in (t_{k-1}, t_k],
//              released once a later sample closes the block.
class Decimator {
 public:
  Decimator(double interval, DecimationMode mode = DecimationMode::BlockMean) : interval_(interval), mode_(mode) {
    if (!(interval > 0.0)) throw std::invalid_argument("Decimator: interval must be positive");
  }

  std::size_t rejected() const { return rejected_; }
  std::size_t gaps() const { return gaps_; }

  // Returns false when the sample is out of order and was dropped.
  bool push(const MeasurementSample& s, std::vector<MeasurementSample>& out) {
    if (!last_) {
      origin_ = s.time;
      next_ = 1;
      out.push_back(s);
      last_ = s;
      last_released_ = true;
      return true;
    }
    if (!(s.time > last_->time)) {
      ++rejected_;
      return false;
    }
    if (s.time - last_->time > 10.0 * interval_) ++gaps_;
    if (mode_ == DecimationMode::Nearest) {
      push_nearest(s, out);
    } else {
      push_block(s, out);
    }
    last_ = s;
    return true;
  }

  // End of stream: releases the open block (BlockMean). Nearest has nothing
  // pending because no later update time has been reached.
  void flush(std::vector<MeasurementSample>& out) {
    if (mode_ != DecimationMode::BlockMean || count_ == 0) return;
    const double n = static_cast<double>(count_);
    out.push_back({sum_time_ / n, sum_pressure_ / n});
    sum_time_ = sum_pressure_ = 0.0;
    count_ = 0;
  }

 private:
  double update_time(std::size_t k) const { return origin_ + static_cast<double>(k) * interval_; }
  double tol() const { return 1e-9 * interval_; }

  void push_nearest(const MeasurementSample& s, std::vector<MeasurementSample>& out) {
    bool released = false;
    for (double tk = update_time(next_); tk <= s.time + tol(); tk = update_time(++next_)) {
      if (s.time <= tk + tol()) {
        out.push_back(s);
        released = true;
      } else if (!last_released_) {
        out.push_back(*last_);
        last_released_ = true;
      }
    }
    last_released_ = released;
  }

  void push_block(const MeasurementSample& s, std::vector<MeasurementSample>& out) {
    if (s.time > update_time(next_) + tol()) {
      if (count_ > 0) {
        const double n = static_cast<double>(count_);
        out.push_back({sum_time_ / n, sum_pressure_ / n});
      }
      sum_time_ = sum_pressure_ = 0.0;
      count_ = 0;
      while (s.time > update_time(next_) + tol()) ++next_;
    }
    sum_time_ += s.time;
    sum_pressure_ += s.pressure;
    ++count_;
  }

  double interval_;
  DecimationMode mode_;
  double origin_ = 0.0;
  std::size_t next_ = 0;
  std::optional<MeasurementSample> last_;
  bool last_released_ = false;
  double sum_time_ = 0.0;
  double sum_pressure_ = 0.0;
  std::size_t count_ = 0;
  std::size_t rejected_ = 0;
  std::size_t gaps_ = 0;
};

struct RunDiagnostics {
  std::size_t rejected_samples = 0;
  std::size_t gap_warnings = 0;
  std::size_t anchor_clamps = 0;
};

// Decimator + estimator wired for incremental use (file or live input).
class StreamingEstimator {
 public:
  StreamingEstimator(const EwarsConfig& config, const BlowdownModel& model)
      : decimator_(config.update_interval, config.decimation), estimator_(config, model) {}

  template <class Sink>
  void push(const MeasurementSample& s, Sink&& sink) {
    scratch_.clear();
    decimator_.push(s, scratch_);
    for (const auto& d : scratch_) {
      if (auto rec = estimator_.push(d)) sink(*rec);
    }
  }

  template <class Sink>
  void finish(Sink&& sink) {
    scratch_.clear();
    decimator_.flush(scratch_);
    for (const auto& d : scratch_) {
      if (auto rec = estimator_.push(d)) sink(*rec);
    }
  }

  RunDiagnostics diagnostics() const {
    return {decimator_.rejected(), decimator_.gaps(), estimator_.anchor_clamps()};
  }
  const EwarsEstimator& estimator() const { return estimator_; }

 private:
  Decimator decimator_;
  EwarsEstimator estimator_;
  std::vector<MeasurementSample> scratch_;
};

inline std::vector<EstimateRecord> run_ewars(std::span<const MeasurementSample> stream, const EwarsConfig& config,
                                             const BlowdownModel& model, RunDiagnostics* diag = nullptr) {
  std::vector<EstimateRecord> out;
  StreamingEstimator se(config, model);
  const auto collect = [&](const EstimateRecord& r) { out.push_back(r); };
  for (const auto& s : stream) se.push(s, collect);
  se.finish(collect);
  if (diag) *diag = se.diagnostics();
  return out;
}

inline std::vector<MeasurementSample> decimate(std::span<const MeasurementSample> stream, double interval,
                                              DecimationMode mode = DecimationMode::BlockMean) {
  Decimator d(interval, mode);
  std::vector<MeasurementSample> out;
  for (const auto& s : stream) d.push(s, out);
  d.flush(out);
  return out;
}

struct BenchReport {
  std::size_t evals_fbfs = 0;
  std::size_t evals_ewars = 0;
  double wall_fbfs_s = 0.0;
  double wall_ewars_s = 0.0;
  int n0_fbfs = 0;
  std::vector<EstimateRecord> fbfs;
  std::vector<EstimateRecord> ewars;
};

// Per-step exhaustive search on F_t alone against EWARS on the same stream.
inline BenchReport bench_compare(std::span<const MeasurementSample> stream, const EwarsConfig& config,
                                 const BlowdownModel& model, int n0_fbfs) {
  using clock = std::chrono::steady_clock;
  BenchReport rep;
  rep.n0_fbfs = n0_fbfs;
  const auto samples = decimate(stream, config.update_interval, config.decimation);

  const auto t0 = clock::now();
  const ForwardModel fm(model, config.model_dt);
  for (std::size_t k = 1; k < samples.size(); ++k) {
    const auto& prev = samples[k - 1];
    const auto& cur = samples[k];
    const double anchor_p = fm.clamp_anchor(prev.pressure);
    auto f = [&](double a) {
      const double predicted = config.anchor_mode == AnchorMode::PreviousMeasurement
                                   ? fm.advance(a, prev.time, anchor_p, cur.time)
                                   : fm.advance(a, 0.0, model.initial.p01, cur.time);
      const double r = predicted - cur.pressure;
      return r * r;
    };
    const SearchResult r = full_bfs(f, config.bounds, n0_fbfs);
    rep.fbfs.push_back({cur.time, r.argmin, r.value, r.evaluations, r.levels});
    rep.evals_fbfs += r.evaluations;
  }
  const auto t1 = clock::now();
  rep.ewars = run_ewars(stream, config, model);
  const auto t2 = clock::now();
  for (const auto& r : rep.ewars) rep.evals_ewars += r.evaluations;
  rep.wall_fbfs_s = std::chrono::duration<double>(t1 - t0).count();
  rep.wall_ewars_s = std::chrono::duration<double>(t2 - t1).count();
  return rep;
}

}  // namespace ewars
