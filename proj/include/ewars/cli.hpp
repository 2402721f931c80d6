#pragma once

// Command-line front end: simulate | estimate | replay | bench | repro.
// Exit codes: 0 ok, 2 config, 3 data, 4 IO.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ewars/chamber_sim.hpp"
#include "ewars/config.hpp"
#include "ewars/estimator.hpp"
#include "ewars/io.hpp"
#include "ewars/pipeline.hpp"

namespace ewars {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitData = 3, kExitIo = 4 };

namespace cli {

struct Streams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::string alpha;
  std::string n_grid;
  std::string epsilon_mm2;
  std::string anchor;
  std::string seed;
  std::string noise_sigma;
  std::string out;
  std::string input;
  std::string truth;
  std::vector<std::string> sets;
  bool strict = false;
};

inline void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config_path, "Config file (falls back to $EWARS_CONFIG)");
  sub->add_option("--preset", o.preset, "Estimator preset: constant | variable");
  sub->add_option("--alpha", o.alpha, "Exponential weighting factor in [0, 1]");
  sub->add_option("--n-grid", o.n_grid, "Grid intervals per refinement level");
  sub->add_option("--epsilon-mm2", o.epsilon_mm2, "Target area resolution (mm^2)");
  sub->add_option("--anchor", o.anchor, "Model anchor: previous | initial");
  sub->add_option("--seed", o.seed, "Sensor noise seed");
  sub->add_option("--noise-sigma-pa", o.noise_sigma, "Sensor noise standard deviation (Pa)");
  sub->add_option("--out", o.out, "Output path ('-' for stdout)");
  sub->add_option("--set", o.sets, "Override any config key: key=value")->take_all();
  sub->add_flag("--strict", o.strict, "Malformed input rows are fatal");
}

inline RunConfig resolve_config(const CommonOptions& o) {
  ConfigBuilder b;
  std::string path = o.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("EWARS_CONFIG"); env && *env) path = env;
  }
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    b.parse(in);
  }
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    b.set(std::string(detail::trim(kv.substr(0, eq))), std::string(detail::trim(kv.substr(eq + 1))));
  }
  auto flag = [&](const std::string& key, const std::string& v) {
    if (!v.empty()) b.set(key, v);
  };
  flag("preset", o.preset);
  flag("alpha", o.alpha);
  flag("n_grid", o.n_grid);
  flag("epsilon_mm2", o.epsilon_mm2);
  flag("anchor", o.anchor);
  flag("seed", o.seed);
  flag("noise_sigma_pa", o.noise_sigma);
  flag("output", o.out);
  flag("input", o.input);
  flag("truth_file", o.truth);
  if (o.strict) b.set("strict", "true");
  return b.build();
}

// Output file or the given stream for "" / "-".
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : path_(path) {
    if (path.empty() || path == "-") {
      os_ = &fallback;
      return;
    }
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*file_) throw IoError("cannot write '" + path + "'");
    os_ = file_.get();
  }

  std::ostream& stream() { return *os_; }
  bool is_file() const { return file_ != nullptr; }
  const std::string& path() const { return path_; }

  void finish() {
    os_->flush();
    if (!*os_) throw IoError("write failed for '" + (path_.empty() ? std::string("stdout") : path_) + "'");
  }

 private:
  std::string path_;
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << text;
  if (!f.flush()) throw IoError("write failed for '" + path + "'");
}

inline void report_warnings(const EstimationRun& run, std::ostream& err) {
  for (const auto& w : run.warnings) err << "warning: " << w << '\n';
  if (run.diagnostics.rejected_samples) {
    err << "warning: " << run.diagnostics.rejected_samples << " out-of-order samples rejected\n";
  }
  if (run.diagnostics.gap_warnings) {
    err << "warning: " << run.diagnostics.gap_warnings << " gaps longer than 10 update intervals\n";
  }
  if (run.diagnostics.anchor_clamps) {
    err << "warning: " << run.diagnostics.anchor_clamps << " anchor pressures below ambient clamped\n";
  }
}

// --------------------------------------------------------------------------

inline int cmd_simulate(const CommonOptions& o, const std::string& truth_out, const std::string& unit,
                        Streams io) {
  RunConfig cfg = resolve_config(o);
  if (!unit.empty()) {
    ConfigBuilder b;
    b.set("pressure_unit", unit);
    cfg.pressure_unit = b.build().pressure_unit;
  }
  const auto model = cfg.model();
  const auto sim = simulate(cfg.make_scenario(), cfg.sensor, model, cfg.integrator_dt);
  Output out(cfg.output, io.out);
  write_measurements(out.stream(), sim.measurements, cfg.pressure_unit);
  out.finish();
  if (!truth_out.empty()) {
    Output t(truth_out, io.out);
    write_truth(t.stream(), sim);
    t.finish();
  }
  return kExitOk;
}

struct EstimateOptions {
  std::string summary;
  double speed = 0.0;
};

// File input runs offline unless paced (speed > 0); '-' always runs live.
inline int run_estimation(const CommonOptions& o, const EstimateOptions& eo, Streams io) {
  RunConfig cfg = resolve_config(o);
  const bool paced = eo.speed > 0.0;
  if (cfg.input.empty()) throw ConfigError("no input: pass --input <file> or --input - for stdin");
  const auto model = cfg.model();

  TruthSeries truth;
  if (!cfg.truth_file.empty()) truth = read_truth(cfg.truth_file);

  Output out(cfg.output, io.out);
  out.stream() << kEstimateHeader;
  const RecordSink sink = [&](const EstimateRecord& r) {
    out.stream() << estimate_row(r, &truth);
    if (paced || cfg.input == "-") out.stream().flush();
  };

  EstimationRun run;
  const LiveOptions live{4096, eo.speed};
  if (cfg.input == "-") {
    run = estimate_live(io.in, cfg.ewars, model, cfg.strict, sink, live);
  } else {
    std::ifstream in(cfg.input);
    if (!in) throw IoError("cannot open measurement file '" + cfg.input + "'");
    run = paced ? estimate_live(in, cfg.ewars, model, cfg.strict, sink, live)
                     : estimate_offline(in, cfg.ewars, model, cfg.strict, sink);
  }
  out.finish();
  report_warnings(run, io.err);

  std::ostringstream summary;
  write_summary(summary, summarize(run.records, run.measurements, model, &truth));
  std::string summary_path = eo.summary;
  if (summary_path.empty() && out.is_file()) summary_path = out.path() + ".summary";
  if (!summary_path.empty() && summary_path != "-") write_text_file(summary_path, summary.str());
  (out.is_file() ? io.out : io.err) << summary.str();
  return kExitOk;
}

inline std::vector<MeasurementSample> bench_input(const RunConfig& cfg, const BlowdownModel& model,
                                                  TruthSeries& truth) {
  if (!cfg.input.empty()) {
    if (!cfg.truth_file.empty()) truth = read_truth(cfg.truth_file);
    return ingest_measurements(cfg.input, cfg.strict);
  }
  const auto sim = simulate(cfg.make_scenario(), cfg.sensor, model, cfg.integrator_dt);
  truth.pressure = sim.truth;
  truth.area = sim.true_area;
  return sim.measurements;
}

inline double stddev_after(std::span<const EstimateRecord> recs, double t_from) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& r : recs) {
    if (r.time < t_from) continue;
    sum += r.area_estimate;
    ++n;
  }
  if (n < 2) return 0.0;
  const double mean = sum / static_cast<double>(n);
  for (const auto& r : recs) {
    if (r.time < t_from) continue;
    sq += (r.area_estimate - mean) * (r.area_estimate - mean);
  }
  return std::sqrt(sq / static_cast<double>(n - 1));
}

inline void write_bench(const BenchReport& rep, const TruthSeries& truth, double converged_from, Output& csv,
                        std::ostream& report) {
  csv.stream() << "time_s,area_mm2_fbfs,area_mm2_ewars,area_mm2_true\n";
  const std::size_t n = std::min(rep.fbfs.size(), rep.ewars.size());
  for (std::size_t i = 0; i < n; ++i) {
    csv.stream() << detail::exact(rep.ewars[i].time) << ',' << detail::sig6(m2_to_mm2(rep.fbfs[i].area_estimate))
                 << ',' << detail::sig6(m2_to_mm2(rep.ewars[i].area_estimate)) << ',';
    if (!truth.empty()) csv.stream() << detail::sig6(m2_to_mm2(truth.area_at(rep.ewars[i].time)));
    csv.stream() << '\n';
  }
  csv.finish();
  const double sd_f = stddev_after(rep.fbfs, converged_from);
  const double sd_e = stddev_after(rep.ewars, converged_from);
  report << "fbfs_grid_n0 = " << rep.n0_fbfs << '\n';
  report << "evals_fbfs = " << rep.evals_fbfs << '\n';
  report << "evals_ewars = " << rep.evals_ewars << '\n';
  report << "eval_ratio = " << detail::sig6(rep.evals_ewars ? double(rep.evals_fbfs) / double(rep.evals_ewars) : 0.0)
         << '\n';
  report << "wall_fbfs_s = " << detail::sig6(rep.wall_fbfs_s) << '\n';
  report << "wall_ewars_s = " << detail::sig6(rep.wall_ewars_s) << '\n';
  report << "converged_window_from_s = " << detail::sig6(converged_from) << '\n';
  report << "stddev_fbfs_mm2 = " << detail::sig6(m2_to_mm2(sd_f)) << '\n';
  report << "stddev_ewars_mm2 = " << detail::sig6(m2_to_mm2(sd_e)) << '\n';
  report << "variance_ratio_ewars_over_fbfs = " << detail::sig6(sd_f > 0 ? (sd_e * sd_e) / (sd_f * sd_f) : 0.0)
         << '\n';
}

inline int cmd_bench(const CommonOptions& o, double converged_from, Streams io) {
  RunConfig cfg = resolve_config(o);
  const auto model = cfg.model();
  TruthSeries truth;
  const auto stream = bench_input(cfg, model, truth);
  const auto rep = bench_compare(stream, cfg.ewars, model, cfg.resolved_fbfs_n0());
  Output csv(cfg.output, io.out);
  std::ostringstream report;
  write_bench(rep, truth, converged_from, csv, report);
  if (csv.is_file()) write_text_file(csv.path() + ".report", report.str());
  (csv.is_file() ? io.out : io.err) << report.str();
  return kExitOk;
}

// Canned synthetic runs: three constant leaks, increasing and decreasing
// stepped leaks, and the fBFS/EWARS comparison at 0.25 mm^2. Physics, noise
// and seed come from the config.
inline int cmd_repro(const CommonOptions& o, const std::string& run, const std::string& out_dir, Streams io) {
  RunConfig base = resolve_config(o);
  std::filesystem::path dir(out_dir.empty() ? "." : out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  const auto model = base.model();

  auto run_one = [&](const LeakScenario& sc, const EwarsConfig& ec_cfg, const std::string& name) {
    const auto sim = simulate(sc, base.sensor, model, base.integrator_dt);
    const auto recs = run_ewars(sim.measurements, ec_cfg, model);
    TruthSeries truth{sim.truth, sim.true_area};
    const auto path = (dir / (name + ".csv")).string();
    Output out(path, io.out);
    out.stream() << kEstimateHeader;
    for (const auto& r : recs) out.stream() << estimate_row(r, &truth);
    out.finish();
    std::ostringstream summary;
    write_summary(summary, summarize(recs, sim.measurements, model, &truth));
    write_text_file(path + ".summary", summary.str());
    io.out << "== " << path << '\n' << summary.str();
  };

  if (run == "constant") {
    EwarsConfig c = base.ewars;
    c.n_grid = 150;
    c.alpha = 0.125;
    for (const char* a : {"0.16", "0.22", "0.28"}) {
      run_one(scenario_constant(mm2_to_m2(std::stod(a)), base.duration), c, std::string("constant_") + a + "mm2");
    }
  } else if (run == "steps") {
    EwarsConfig c = base.ewars;
    c.n_grid = 250;
    c.alpha = 0.01;
    const double lo = mm2_to_m2(0.08), mid = mm2_to_m2(0.12), hi = mm2_to_m2(0.16);
    run_one(scenario_steps({lo, mid, hi}, base.step_duration), c, "steps_increasing");
    run_one(scenario_steps({hi, mid, lo}, base.step_duration), c, "steps_decreasing");
  } else if (run == "compare") {
    EwarsConfig c = base.ewars;
    c.n_grid = 150;
    c.alpha = 0.125;
    const auto sim = simulate(scenario_constant(mm2_to_m2(0.25), base.duration), base.sensor, model,
                              base.integrator_dt);
    TruthSeries truth{sim.truth, sim.true_area};
    const auto rep = bench_compare(sim.measurements, c, model, base.resolved_fbfs_n0());
    const auto path = (dir / "compare.csv").string();
    Output csv(path, io.out);
    std::ostringstream report;
    write_bench(rep, truth, 0.5 * base.duration, csv, report);
    write_text_file(path + ".report", report.str());
    io.out << "== " << path << '\n' << report.str();
  } else {
    throw ConfigError("repro: unknown run '" + run + "' (expected constant, steps or compare)");
  }
  return kExitOk;
}

}  // namespace cli

inline int run_cli(const std::vector<std::string>& args, std::istream& in = std::cin, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Leak-area estimation for pressurized chambers"};
  app.require_subcommand(1);

  cli::CommonOptions sim_o, est_o, rep_o, bench_o, repro_o;
  std::string truth_out, unit;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic measurement CSV");
  cli::add_common(sim, sim_o);
  sim->add_option("--truth-out", truth_out, "Write the noise-free stream and true areas here");
  sim->add_option("--pressure-unit", unit, "pa | atm");

  cli::EstimateOptions est_e, rep_e;
  auto* est = app.add_subcommand("estimate", "Run EWARS on a measurement file or stdin ('-')");
  cli::add_common(est, est_o);
  est->add_option("--input", est_o.input, "Measurement CSV, '-' for live stdin");
  est->add_option("--truth", est_o.truth, "Truth CSV from simulate --truth-out");
  est->add_option("--summary", est_e.summary, "Summary path (default <out>.summary)");

  auto* rep = app.add_subcommand("replay", "Re-run estimation over a recorded measurement file");
  cli::add_common(rep, rep_o);
  rep->add_option("--input", rep_o.input, "Measurement CSV")->required();
  rep->add_option("--truth", rep_o.truth, "Truth CSV from simulate --truth-out");
  rep->add_option("--summary", rep_e.summary, "Summary path (default <out>.summary)");
  rep->add_option("--speed", rep_e.speed, "Stream through the live pipeline at this multiple of real time");

  double converged_from = 150.0;
  auto* bench = app.add_subcommand("bench", "Compare per-step fBFS with EWARS on one stream");
  cli::add_common(bench, bench_o);
  bench->add_option("--input", bench_o.input, "Measurement CSV (default: simulate from config)");
  bench->add_option("--converged-from", converged_from, "Start of the window for estimate spread (s)");

  std::string repro_run, out_dir = ".";
  auto* repro = app.add_subcommand("repro", "Reproduce the constant, variable and comparison runs");
  cli::add_common(repro, repro_o);
  repro->add_option("run", repro_run, "constant | steps | compare")->required();
  repro->add_option("--out-dir", out_dir, "Directory for the plot-ready CSVs");

  std::vector<std::string> argv_store{"ewars"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  const cli::Streams io{in, out, err};
  try {
    if (*sim) return cli::cmd_simulate(sim_o, truth_out, unit, io);
    if (*est) return cli::run_estimation(est_o, est_e, io);
    if (*rep) return cli::run_estimation(rep_o, rep_e, io);
    if (*bench) return cli::cmd_bench(bench_o, converged_from, io);
    if (*repro) return cli::cmd_repro(repro_o, repro_run, out_dir, io);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace ewars
