#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ewars/chamber_sim.hpp"
#include "ewars/estimator.hpp"

using namespace ewars;

namespace {

const BlowdownModel kChamber = BlowdownModel::reference_chamber();

// Decimated (0.1 s) noise-free or noisy stream for a constant leak.
std::vector<MeasurementSample> decimated_stream(double area_mm2, double duration, double sigma, unsigned seed) {
  SensorModel sensor;
  sensor.sample_rate = 10.0;
  sensor.noise_sigma = sigma;
  sensor.seed = seed;
  return simulate(scenario_constant(mm2_to_m2(area_mm2), duration), sensor, kChamber).measurements;
}

// Textbook recursion from the first update, evaluated independently for one
// candidate area.
double naive_smoothed(double a, const std::vector<MeasurementSample>& s, std::size_t upto, const EwarsConfig& cfg) {
  double acc = objective(a, s[0], s[1], cfg, kChamber);
  for (std::size_t k = 2; k <= upto; ++k) acc = ew_update(acc, objective(a, s[k - 1], s[k], cfg, kChamber), cfg.alpha);
  return acc;
}

std::vector<EstimateRecord> run_steps(EwarsEstimator& est, const std::vector<MeasurementSample>& s) {
  std::vector<EstimateRecord> out;
  for (const auto& m : s) {
    if (auto r = est.push(m)) out.push_back(*r);
  }
  return out;
}

}  // namespace

TEST(EwUpdate, Examples) {
  EXPECT_DOUBLE_EQ(ew_update(4.0, 2.0, 0.125), 3.75);
  EXPECT_EQ(ew_update(4.0, 2.0, 1.0), 2.0);
  EXPECT_EQ(ew_update(4.0, 2.0, 0.0), 4.0);
}

TEST(Config, HistoryDepth) {
  EXPECT_EQ(EwarsConfig::constant_leak().history_depth(), 140u);
  EXPECT_EQ(EwarsConfig::variable_leak().history_depth(), 1604u);
  EwarsConfig c;
  c.alpha = 1.0;
  EXPECT_EQ(c.history_depth(), 0u);
}

TEST(Config, Presets) {
  const auto v = EwarsConfig::variable_leak();
  EXPECT_EQ(v.n_grid, 250);
  EXPECT_EQ(v.alpha, 0.01);
  const auto c = EwarsConfig::constant_leak();
  EXPECT_EQ(c.n_grid, 150);
  EXPECT_EQ(c.alpha, 0.125);
}

TEST(Config, ValidateRejectsBadValues) {
  EwarsConfig c;
  c.alpha = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.n_grid = 2;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.epsilon = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.bounds = {1e-6, 1e-9};
  EXPECT_THROW(EwarsEstimator(c, kChamber), std::invalid_argument);
}

TEST(Objective, AnchorModes) {
  EwarsConfig cfg;
  const MeasurementSample prev{10.0, 190000.0}, cur{10.1, 189990.0};
  const double a = mm2_to_m2(0.2);
  const double from_prev = model_pressure(a, prev, cur.time, cfg, kChamber);
  EXPECT_EQ(from_prev, propagate(prev.pressure, prev.time, cur.time, kChamber.coefficients(a), cfg.model_dt, kChamber));
  cfg.anchor_mode = AnchorMode::InitialCondition;
  const double from_start = model_pressure(a, prev, cur.time, cfg, kChamber);
  EXPECT_NEAR(from_start, propagate(kChamber.initial.p01, 0.0, cur.time, kChamber.coefficients(a), 1e-3, kChamber),
              1e-4);
  EXPECT_DOUBLE_EQ(objective(a, prev, cur, cfg, kChamber), (from_start - cur.pressure) * (from_start - cur.pressure));
}

TEST(Ewars, FirstSampleOnlyAnchors) {
  EwarsEstimator est(EwarsConfig{}, kChamber);
  EXPECT_FALSE(est.push({0.0, 202650.0}).has_value());
  EXPECT_TRUE(est.push({0.1, 202640.0}).has_value());
  EXPECT_EQ(est.steps(), 1u);
}

TEST(Ewars, MatchesIndependentRecursion) {
  const auto s = decimated_stream(0.22, 4.0, 100.0, 3);
  EwarsConfig cfg;
  EwarsEstimator est(cfg, kChamber);
  const auto recs = run_steps(est, s);
  ASSERT_EQ(recs.size(), s.size() - 1);
  for (std::size_t k : {1ul, 5ul, 20ul, recs.size()}) {
    const auto ref = ars([&](double a) { return naive_smoothed(a, s, k, cfg); }, cfg.bounds, cfg.n_grid, cfg.epsilon);
    EXPECT_NEAR(recs[k - 1].area_estimate, ref.argmin, cfg.epsilon) << k;
    EXPECT_NEAR(recs[k - 1].smoothed_objective_at_min, ref.value, 1e-9 * ref.value + 1e-9) << k;
    EXPECT_EQ(recs[k - 1].evaluations, ref.evaluations);
    EXPECT_EQ(recs[k - 1].refinement_levels, ref.levels);
  }
}

TEST(Ewars, AlphaOneIsPerStepSearch) {
  const auto s = decimated_stream(0.25, 3.0, 100.0, 9);
  EwarsConfig cfg;
  cfg.alpha = 1.0;
  EwarsEstimator est(cfg, kChamber);
  const auto recs = run_steps(est, s);
  for (std::size_t k = 1; k < s.size(); ++k) {
    const auto ref = ars([&](double a) { return objective(a, s[k - 1], s[k], cfg, kChamber); }, cfg.bounds,
                         cfg.n_grid, cfg.epsilon);
    EXPECT_EQ(recs[k - 1].area_estimate, ref.argmin) << k;
    EXPECT_EQ(recs[k - 1].smoothed_objective_at_min, ref.value) << k;
  }
}

TEST(Ewars, AlphaZeroKeepsFirstObjective) {
  const auto s = decimated_stream(0.25, 2.0, 100.0, 4);
  EwarsConfig cfg;
  cfg.alpha = 0.0;
  EwarsEstimator est(cfg, kChamber);
  const auto recs = run_steps(est, s);
  const auto ref = ars([&](double a) { return objective(a, s[0], s[1], cfg, kChamber); }, cfg.bounds, cfg.n_grid,
                       cfg.epsilon);
  for (const auto& r : recs) EXPECT_EQ(r.area_estimate, ref.argmin);
}

TEST(Ewars, SmoothedValuesStayWithinObjectiveRange) {
  const auto s = decimated_stream(0.2, 22.0, 200.0, 12);  // > history depth
  EwarsConfig cfg;
  EwarsEstimator est(cfg, kChamber);
  const auto so0 = est.smoothed();
  std::vector<double> lo(so0.grid.size(), INFINITY), hi(so0.grid.size(), -INFINITY);
  for (std::size_t k = 0; k < s.size(); ++k) {
    est.push(s[k]);
    if (k == 0) continue;
    const auto so = est.smoothed();
    for (std::size_t i = 0; i < so.grid.size(); i += 10) {
      const double f = objective(so.grid[i], s[k - 1], s[k], cfg, kChamber);
      lo[i] = std::min(lo[i], f);
      hi[i] = std::max(hi[i], f);
      ASSERT_GE(so.s_values[i], lo[i] * (1 - 1e-12)) << k << " " << i;
      ASSERT_LE(so.s_values[i], hi[i] * (1 + 1e-12)) << k << " " << i;
    }
  }
}

TEST(Ewars, OutOfOrderStepLeavesStateUntouched) {
  const auto s = decimated_stream(0.22, 1.0, 50.0, 1);
  EwarsEstimator a(EwarsConfig{}, kChamber), b(EwarsConfig{}, kChamber);
  for (std::size_t k = 0; k < 5; ++k) {
    a.push(s[k]);
    b.push(s[k]);
  }
  EXPECT_THROW(a.step(s[4], s[3]), std::invalid_argument);
  EXPECT_THROW(a.step(s[2], s[3]), std::invalid_argument);
  EXPECT_EQ(a.steps(), b.steps());
  for (std::size_t k = 5; k < s.size(); ++k) {
    const auto ra = a.push(s[k]);
    const auto rb = b.push(s[k]);
    EXPECT_EQ(ra->area_estimate, rb->area_estimate);
    EXPECT_EQ(ra->smoothed_objective_at_min, rb->smoothed_objective_at_min);
  }
}

TEST(Ewars, SealedChamberPinsLowerBound) {
  std::vector<MeasurementSample> s;
  for (int k = 0; k <= 50; ++k) s.push_back({0.1 * k, kChamber.initial.p01});
  EwarsConfig cfg;
  EwarsEstimator est(cfg, kChamber);
  const auto recs = run_steps(est, s);
  EXPECT_EQ(recs.back().area_estimate, cfg.bounds.a_lb);
}

TEST(Ewars, NoiseFreeConstantLeakIsRecovered) {
  for (double area : {0.08, 0.16, 0.28}) {
    const auto s = decimated_stream(area, 30.0, 0.0, 0);
    EwarsEstimator est(EwarsConfig{}, kChamber);
    const auto recs = run_steps(est, s);
    EXPECT_NEAR(m2_to_mm2(recs.back().area_estimate), area, 1e-4) << area;
  }
}

TEST(Ewars, InitialConditionAnchorRecoversLeak) {
  const auto s = decimated_stream(0.22, 30.0, 0.0, 0);
  EwarsConfig cfg;
  cfg.anchor_mode = AnchorMode::InitialCondition;
  EwarsEstimator est(cfg, kChamber);
  const auto recs = run_steps(est, s);
  EXPECT_NEAR(m2_to_mm2(recs.back().area_estimate), 0.22, 1e-4);
}

TEST(Ewars, InterpolateStrategyTracksReplay) {
  const auto s = decimated_stream(0.22, 40.0, 100.0, 5);
  EwarsConfig cfg;
  EwarsEstimator replay(cfg, kChamber);
  cfg.refine_strategy = RefineStrategy::Interpolate;
  EwarsEstimator interp(cfg, kChamber);
  const auto a = run_steps(replay, s);
  const auto b = run_steps(interp, s);
  EXPECT_NEAR(m2_to_mm2(b.back().area_estimate), m2_to_mm2(a.back().area_estimate), 0.01);
  EXPECT_EQ(interp.replay_evaluations(), 0u);
  EXPECT_GT(replay.replay_evaluations(), 0u);
}

TEST(Ewars, LatestObjectiveMatchesFreeFunction) {
  const auto s = decimated_stream(0.22, 1.0, 0.0, 0);
  EwarsConfig cfg;
  EwarsEstimator est(cfg, kChamber);
  EXPECT_THROW(est.latest_objective(1e-7), std::logic_error);
  run_steps(est, s);
  const double a = mm2_to_m2(0.3);
  EXPECT_EQ(est.latest_objective(a), objective(a, s[s.size() - 2], s.back(), cfg, kChamber));
}

TEST(Ewars, AnchorBelowAmbientIsClamped) {
  std::vector<MeasurementSample> s{{0.0, 101000.0}, {0.1, 101300.0}, {0.2, 101325.0}};
  EwarsEstimator est(EwarsConfig{}, kChamber);
  run_steps(est, s);
  EXPECT_EQ(est.anchor_clamps(), 2u);
}

TEST(Decimator, NearestTakesSampleAtOrBeforeUpdateTime) {
  Decimator d(0.1, DecimationMode::Nearest);
  std::vector<MeasurementSample> out;
  for (int k = 0; k <= 30; ++k) d.push({0.01 * k, 1000.0 - k}, out);
  ASSERT_EQ(out.size(), 4u);
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(out[j].time, 0.1 * j, 1e-12);
    EXPECT_EQ(out[j].pressure, 1000.0 - 10 * j);
  }
}

TEST(Decimator, NearestAcrossGapReleasesLastSampleOnce) {
  Decimator d(0.1, DecimationMode::Nearest);
  std::vector<MeasurementSample> out;
  d.push({0.0, 10.0}, out);
  d.push({0.05, 9.0}, out);
  d.push({0.35, 8.0}, out);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].time, 0.05);
  d.push({0.4, 7.0}, out);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[2].time, 0.4);
}

TEST(Decimator, BlockMeanAveragesEachInterval) {
  Decimator d(0.1);
  std::vector<MeasurementSample> out;
  for (int k = 0; k <= 20; ++k) d.push({0.01 * k, static_cast<double>(k)}, out);
  ASSERT_EQ(out.size(), 2u);  // first sample + block (0, 0.1]; (0.1, 0.2] still open
  EXPECT_EQ(out[0].pressure, 0.0);
  EXPECT_NEAR(out[1].time, 0.055, 1e-12);
  EXPECT_NEAR(out[1].pressure, 5.5, 1e-12);
  d.push({0.21, 21.0}, out);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_NEAR(out[2].pressure, 15.5, 1e-12);
}

TEST(Decimator, FlushReleasesOpenBlock) {
  Decimator d(0.1);
  std::vector<MeasurementSample> out;
  for (int k = 0; k <= 10; ++k) d.push({0.01 * k, static_cast<double>(k)}, out);
  ASSERT_EQ(out.size(), 1u);
  d.flush(out);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(out[1].pressure, 5.5, 1e-12);
  d.flush(out);
  EXPECT_EQ(out.size(), 2u);
  Decimator n(0.1, DecimationMode::Nearest);
  std::vector<MeasurementSample> none;
  n.push({0.0, 1.0}, none);
  n.push({0.05, 1.0}, none);
  n.flush(none);
  EXPECT_EQ(none.size(), 1u);
}

TEST(Decimator, RejectsOutOfOrderAndCountsGaps) {
  Decimator d(0.1);
  std::vector<MeasurementSample> out;
  EXPECT_TRUE(d.push({0.0, 1.0}, out));
  EXPECT_TRUE(d.push({0.1, 1.0}, out));
  EXPECT_FALSE(d.push({0.05, 1.0}, out));
  EXPECT_FALSE(d.push({0.1, 1.0}, out));
  EXPECT_TRUE(d.push({5.0, 1.0}, out));
  EXPECT_EQ(d.rejected(), 2u);
  EXPECT_EQ(d.gaps(), 1u);
  EXPECT_THROW(Decimator(0.0), std::invalid_argument);
}

TEST(Streaming, MatchesBatchRun) {
  SensorModel sensor;
  sensor.noise_sigma = 100.0;
  sensor.seed = 2;
  const auto sim = simulate(scenario_constant(mm2_to_m2(0.2), 20.0), sensor, kChamber);
  EwarsConfig cfg;
  const auto batch = run_ewars(sim.measurements, cfg, kChamber);
  StreamingEstimator se(cfg, kChamber);
  std::vector<EstimateRecord> live;
  const auto collect = [&](const EstimateRecord& r) { live.push_back(r); };
  for (const auto& m : sim.measurements) se.push(m, collect);
  EXPECT_EQ(live.size(), 199u);
  se.finish(collect);
  ASSERT_EQ(batch.size(), live.size());
  EXPECT_EQ(batch.size(), 200u);
  EXPECT_NEAR(batch.back().time, 19.9505, 1e-9);
  for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(batch[i].area_estimate, live[i].area_estimate);
}

TEST(Bench, CountsEvaluations) {
  const auto s = decimated_stream(0.25, 3.0, 100.0, 8);
  EwarsConfig cfg;
  const auto rep = bench_compare(s, cfg, kChamber, 1000);
  EXPECT_EQ(rep.fbfs.size(), s.size() - 1);
  EXPECT_EQ(rep.ewars.size(), s.size() - 1);
  EXPECT_EQ(rep.evals_fbfs, 1001u * (s.size() - 1));
  std::size_t sum = 0;
  for (const auto& r : rep.ewars) sum += r.evaluations;
  EXPECT_EQ(rep.evals_ewars, sum);
  EXPECT_LE(rep.evals_ewars, 453u * (s.size() - 1));
}
