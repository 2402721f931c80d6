#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "ewars/cli.hpp"

using namespace ewars;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult invoke(const std::vector<std::string>& args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = run_cli(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ewars_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // 30 s noisy constant leak.
  void simulate_to(const std::string& name, const std::string& truth = "") {
    std::vector<std::string> args{"simulate", "--set", "duration_s=30", "--seed", "4", "--out", path(name)};
    if (!truth.empty()) {
      args.push_back("--truth-out");
      args.push_back(path(truth));
    }
    const auto r = invoke(args);
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir_;
};

}  // namespace

TEST(BoundedQueue, DeliversInOrderUnderBackPressure) {
  BoundedQueue<int> q(4);
  std::thread producer([&] {
    for (int i = 0; i < 1000; ++i) q.push(i);
    q.close();
  });
  int expect = 0;
  while (auto v = q.pop()) EXPECT_EQ(*v, expect++);
  producer.join();
  EXPECT_EQ(expect, 1000);
  EXPECT_FALSE(q.push(5));
}

TEST(Pipeline, LiveEqualsOffline) {
  SensorModel sensor;
  sensor.seed = 3;
  const auto model = BlowdownModel::reference_chamber();
  const auto sim = simulate(scenario_constant(mm2_to_m2(0.2), 20.0), sensor, model);
  std::stringstream csv;
  write_measurements(csv, sim.measurements);
  const std::string text = csv.str();

  auto render = [](const EstimationRun& run) {
    std::string s;
    for (const auto& r : run.records) s += estimate_row(r, nullptr);
    return s;
  };
  std::istringstream a(text), b(text);
  const auto offline = estimate_offline(a, EwarsConfig{}, model, false, nullptr);
  const auto live = estimate_live(b, EwarsConfig{}, model, false, nullptr, LiveOptions{8, 0.0});
  EXPECT_EQ(offline.records.size(), 200u);
  EXPECT_EQ(render(offline), render(live));
}

TEST(Pipeline, LiveSurfacesStrictDataErrors) {
  std::istringstream in("time_s,pressure_pa\n0,200000\n0.2,199990\n0.1,199995\n");
  EXPECT_THROW(estimate_live(in, EwarsConfig{}, BlowdownModel::reference_chamber(), true, nullptr), DataError);
}

TEST_F(CliTest, SimulateIsDeterministic) {
  simulate_to("a.csv");
  simulate_to("b.csv");
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(slurp(path("a.csv")).rfind("time_s,pressure_pa\n", 0), 0u);
}

TEST_F(CliTest, EstimateWritesCsvAndSummary) {
  simulate_to("m.csv", "t.csv");
  const auto r = invoke({"estimate", "--input", path("m.csv"), "--truth", path("t.csv"), "--out", path("e.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto est = slurp(path("e.csv"));
  EXPECT_EQ(est.rfind(kEstimateHeader, 0), 0u);
  EXPECT_NE(est.find(",0.22,"), std::string::npos);
  const auto summary = slurp(path("e.csv.summary"));
  EXPECT_NE(summary.find("converged_area_mm2 = "), std::string::npos);
  EXPECT_NE(summary.find("true_area_mm2 = 0.22"), std::string::npos);
  EXPECT_EQ(r.out, summary);
}

TEST_F(CliTest, StdinLiveMatchesFileByteForByte) {
  simulate_to("m.csv");
  const auto file = invoke({"estimate", "--input", path("m.csv"), "--out", path("file.csv")});
  ASSERT_EQ(file.code, 0) << file.err;
  const auto live = invoke({"estimate", "--input", "-", "--out", path("live.csv")}, slurp(path("m.csv")));
  ASSERT_EQ(live.code, 0) << live.err;
  EXPECT_EQ(slurp(path("file.csv")), slurp(path("live.csv")));
  const auto replay = invoke({"replay", "--input", path("m.csv"), "--out", path("replay.csv")});
  ASSERT_EQ(replay.code, 0) << replay.err;
  EXPECT_EQ(slurp(path("file.csv")), slurp(path("replay.csv")));
}

TEST_F(CliTest, AlphaOneMatchesPerStepSearch) {
  simulate_to("m.csv");
  ASSERT_EQ(invoke({"estimate", "--input", path("m.csv"), "--alpha", "1", "--out", path("ew.csv")}).code, 0);
  const auto samples = decimate(ingest_measurements(path("m.csv")), 0.1);
  const auto model = BlowdownModel::reference_chamber();
  EwarsConfig cfg;
  std::string expect = kEstimateHeader;
  for (std::size_t k = 1; k < samples.size(); ++k) {
    const auto r = ars([&](double a) { return objective(a, samples[k - 1], samples[k], cfg, model); }, cfg.bounds,
                       cfg.n_grid, cfg.epsilon);
    expect += estimate_row({samples[k].time, r.argmin, r.value, r.evaluations, r.levels}, nullptr);
  }
  EXPECT_EQ(slurp(path("ew.csv")), expect);
}

TEST_F(CliTest, ConfigFileEnvFallbackAndOverrides) {
  {
    std::ofstream c(path("run.conf"));
    c << "preset = variable\nduration_s = 5\nnoise_sigma_pa = 0\n";
  }
  ::setenv("EWARS_CONFIG", path("run.conf").c_str(), 1);
  const auto r = invoke({"simulate", "--out", path("m.csv")});
  ::unsetenv("EWARS_CONFIG");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto samples = ingest_measurements(path("m.csv"));
  EXPECT_EQ(samples.size(), 5001u);
  EXPECT_EQ(samples.front().pressure, 202650.0);
}

TEST_F(CliTest, ExitCodes) {
  simulate_to("m.csv");
  EXPECT_EQ(invoke({}).code, kExitConfig);
  EXPECT_EQ(invoke({"estimate", "--bogus"}).code, kExitConfig);
  EXPECT_EQ(invoke({"estimate", "--input", path("m.csv"), "--alpha", "1.5"}).code, kExitConfig);
  EXPECT_EQ(invoke({"estimate", "--input", path("nope.csv")}).code, kExitConfig);
  EXPECT_EQ(invoke({"estimate"}).code, kExitConfig);
  EXPECT_EQ(invoke({"estimate", "--config", path("missing.conf")}).code, kExitConfig);
  EXPECT_EQ(invoke({"repro", "sideways"}).code, kExitConfig);
  {
    std::ofstream bad(path("bad.csv"));
    bad << "time_s,pressure_pa\n0,200000\n0.2,199990\n0.1,199995\n";
  }
  const auto strict = invoke({"estimate", "--input", path("bad.csv"), "--strict", "--out", path("e.csv")});
  EXPECT_EQ(strict.code, kExitData);
  EXPECT_NE(strict.err.find("line 4"), std::string::npos) << strict.err;
  const auto lenient = invoke({"estimate", "--input", path("bad.csv"), "--out", path("e.csv")});
  EXPECT_EQ(lenient.code, kExitOk);
  EXPECT_NE(lenient.err.find("warning: line 4"), std::string::npos) << lenient.err;
  EXPECT_EQ(invoke({"estimate", "--input", path("m.csv"), "--out", path("no/such/dir/e.csv")}).code, kExitIo);
}

TEST_F(CliTest, HeaderOnlyOutputForTinyInput) {
  {
    std::ofstream one(path("one.csv"));
    one << "time_s,pressure_pa\n0,202650\n";
  }
  ASSERT_EQ(invoke({"estimate", "--input", path("one.csv"), "--out", path("e.csv")}).code, 0);
  EXPECT_EQ(slurp(path("e.csv")), kEstimateHeader);
}

TEST_F(CliTest, BenchReport) {
  simulate_to("m.csv");
  const auto r = invoke({"bench", "--input", path("m.csv"), "--set", "fbfs_n0=2000", "--converged-from", "10", "--out",
                      path("b.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = slurp(path("b.csv.report"));
  EXPECT_NE(report.find("evals_fbfs = 600300\n"), std::string::npos) << report;
  EXPECT_NE(report.find("stddev_ewars_mm2"), std::string::npos);
  EXPECT_EQ(slurp(path("b.csv")).rfind("time_s,area_mm2_fbfs,area_mm2_ewars,area_mm2_true\n", 0), 0u);
}

TEST_F(CliTest, BinarySmoke) {
  const std::string cmd = std::string(EWARS_CLI_PATH) + " estimate --alpha 2 --input - < /dev/null > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), kExitConfig);
}
