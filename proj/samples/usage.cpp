// Simulate a noisy constant leak and track it with EWARS.

#include <cstdio>

#include "ewars/ewars.hpp"

int main() {
  using namespace ewars;
  const auto model = BlowdownModel::reference_chamber();

  SensorModel sensor;
  sensor.noise_sigma = 100.0;
  sensor.seed = 42;
  const auto sim = simulate(scenario_constant(mm2_to_m2(0.22), 240.0), sensor, model);

  const auto records = run_ewars(sim.measurements, EwarsConfig::constant_leak(), model);
  for (std::size_t i = 0; i < records.size(); i += 300) {
    std::printf("t = %6.1f s  estimate = %.4f mm^2\n", records[i].time, m2_to_mm2(records[i].area_estimate));
  }
  double sum = 0.0;
  int n = 0;
  for (const auto& r : records) {
    if (r.time < 180.0) continue;
    sum += r.area_estimate;
    ++n;
  }
  std::printf("mean estimate over the last minute = %.4f mm^2 (true 0.22)\n", m2_to_mm2(sum / n));
}
