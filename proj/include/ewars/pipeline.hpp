#pragma once

// Ingestion -> estimation pipeline. The live path runs the reader on its own
// thread and hands samples over a bounded queue; the offline path reads the
// whole stream first. Both feed the same StreamingEstimator, so they emit
// identical rows.

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <functional>
#include <istream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ewars/estimator.hpp"
#include "ewars/io.hpp"

namespace ewars {

template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  // Blocks while full. Returns false once the queue is closed.
  bool push(T value) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  // Blocks while empty; nullopt after close() once drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return v;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
};

struct EstimationRun {
  std::vector<EstimateRecord> records;
  std::vector<MeasurementSample> measurements;
  std::vector<std::string> warnings;
  RunDiagnostics diagnostics;
};

using RecordSink = std::function<void(const EstimateRecord&)>;

inline EstimationRun estimate_offline(std::istream& in, const EwarsConfig& config, const BlowdownModel& model,
                                      bool strict, const RecordSink& sink) {
  EstimationRun run;
  run.measurements = ingest_measurements(in, strict, &run.warnings);
  StreamingEstimator se(config, model);
  const auto emit = [&](const EstimateRecord& r) {
    run.records.push_back(r);
    if (sink) sink(r);
  };
  for (const auto& s : run.measurements) se.push(s, emit);
  se.finish(emit);
  run.diagnostics = se.diagnostics();
  return run;
}

struct LiveOptions {
  std::size_t queue_capacity = 4096;
  double speed = 0.0;  // > 0: pace samples at speed x real time
};

inline EstimationRun estimate_live(std::istream& in, const EwarsConfig& config, const BlowdownModel& model,
                                   bool strict, const RecordSink& sink, const LiveOptions& opts = {}) {
  BoundedQueue<MeasurementSample> queue(opts.queue_capacity);
  std::exception_ptr producer_error;
  std::vector<std::string> warnings;

  std::thread producer([&] {
    try {
      MeasurementReader reader(in, strict);
      const auto start = std::chrono::steady_clock::now();
      std::optional<double> t0;
      while (auto s = reader.next()) {
        if (opts.speed > 0.0) {
          if (!t0) t0 = s->time;
          const auto due = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                       std::chrono::duration<double>((s->time - *t0) / opts.speed));
          std::this_thread::sleep_until(due);
        }
        if (!queue.push(*s)) break;
      }
      warnings = reader.warnings();
    } catch (...) {
      producer_error = std::current_exception();
    }
    queue.close();
  });

  EstimationRun run;
  try {
    StreamingEstimator se(config, model);
    const auto emit = [&](const EstimateRecord& r) {
      run.records.push_back(r);
      if (sink) sink(r);
    };
    while (auto s = queue.pop()) {
      run.measurements.push_back(*s);
      se.push(*s, emit);
    }
    producer.join();
    if (producer_error) std::rethrow_exception(producer_error);
    se.finish(emit);
    run.diagnostics = se.diagnostics();
  } catch (...) {
    queue.close();
    if (producer.joinable()) producer.join();
    throw;
  }
  run.warnings = std::move(warnings);
  return run;
}

}  // namespace ewars
