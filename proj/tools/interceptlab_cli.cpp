// interceptlab command-line tool.
//
// Exit codes: 0 ok, 1 internal error, 2 usage or config error, 3 simulation failure.

#include <glob.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "interceptlab/config.hpp"

namespace fs = std::filesystem;
using namespace interceptlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitSimulation = 3;

struct UsageError : Error {
  using Error::Error;
};

std::vector<std::string> expand_glob(const std::string& pattern) {
  std::vector<std::string> out;
  glob_t g{};
  if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  std::sort(out.begin(), out.end());
  return out;
}

std::shared_ptr<const Trajectory> load_traj(const std::string& path) {
  if (path.empty()) throw ConfigError("no trajectory file given");
  try {
    return std::make_shared<const Trajectory>(load_trajectory(path));
  } catch (const Error& e) {
    throw ConfigError("trajectory '" + path + "': " + e.what());
  }
}

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

// --seed, else INTERCEPT_LAB_SEED, else the config value.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t config_seed) {
  if (flag) return *flag;
  if (const char* env = std::getenv("INTERCEPT_LAB_SEED")) {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(env, &pos);
      if (pos != std::string(env).size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw UsageError(std::string("INTERCEPT_LAB_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  return config_seed;
}

Method checked_method(const std::string& name, const LabConfig& c) {
  try {
    return configured_method(name, c);
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
}

LabConfig load_or_default(const std::string& path) {
  return path.empty() ? parse_config(json::object()) : load_config(path);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory '" + dir + "': " + ec.message());
}

void print_stats(const TrajStats& s) {
  std::printf("duration %.6g s\nmean_speed %.6g m/s\nmax_speed %.6g m/s\nmean_accel %.6g m/s^2\n"
              "max_accel %.6g m/s^2\nextents %.6g %.6g %.6g m\n",
              s.duration, s.mean_speed, s.max_speed, s.mean_accel, s.max_accel, s.extents.x(),
              s.extents.y(), s.extents.z());
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string method;
  std::optional<std::uint64_t> seed;
  std::optional<bool> truth_feed;
  std::string out;
  bool raw = false;
  bool timing = false;
};

int cmd_run(const RunArgs& a) {
  const LabConfig c = load_or_default(a.config);
  Scenario sc = c.scenario;
  sc.method = checked_method(a.method.empty() ? c.method : a.method, c);
  sc.trajectory = load_traj(c.trajectory);
  sc.trajectory_name = stem(c.trajectory);
  sc.seed = resolve_seed(a.seed, sc.seed);
  if (a.truth_feed) sc.truth_feed = *a.truth_feed;
  sc.record_timing = sc.record_timing || a.timing;
  if (c.start.position) {
    sc.start.p = *c.start.position;
    sc.start.heading = c.start.heading;
  } else {
    sc.start = random_start(*sc.trajectory, mix_seed(sc.seed, 7), c.start.min_distance,
                            c.start.max_distance);
  }
  const RunReport rep = run_scenario(sc);
  const std::string text = dump(report_to_json(rep, a.raw));
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text(a.out, text);
    std::printf("%s: %zu events, report written to %s\n", rep.method.c_str(), rep.events.size(),
                a.out.c_str());
  }
  return kExitOk;
}

struct BatchArgs {
  std::string config;
  std::vector<std::string> methods;
  std::string trajectories;
  std::optional<int> starts;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<bool> truth_feed;
  std::string out = "batch_out";
  bool raw = false;
  bool timing = false;
};

std::vector<NamedTrajectory> load_glob(const std::string& pattern) {
  if (pattern.empty()) throw UsageError("no trajectory glob given (--trajectories or batch.trajectories)");
  const auto files = expand_glob(pattern);
  if (files.empty()) throw UsageError("no trajectory files match '" + pattern + "'");
  std::vector<NamedTrajectory> out;
  for (const auto& f : files) out.push_back({stem(f), load_traj(f)});
  return out;
}

int cmd_batch(const BatchArgs& a) {
  const LabConfig c = load_or_default(a.config);
  BatchSpec spec;
  const auto names = a.methods.empty() ? c.batch.methods : a.methods;
  if (names.empty()) throw UsageError("no methods given");
  for (const auto& m : names) spec.methods.push_back(checked_method(m, c));
  spec.starts = a.starts.value_or(c.batch.starts);
  if (spec.starts < 1) throw UsageError("--starts must be at least 1");
  const int jobs = a.jobs.value_or(c.batch.jobs);
  if (jobs < 1) throw UsageError("--jobs must be at least 1");
  spec.trajectories = load_glob(a.trajectories.empty() ? c.batch.trajectories : a.trajectories);
  spec.base = c.scenario;
  spec.base.record_timing = spec.base.record_timing || a.timing;
  if (a.truth_feed) spec.base.truth_feed = *a.truth_feed;
  spec.seed = resolve_seed(a.seed, c.scenario.seed);

  const std::vector<Scenario> scenarios = expand_batch(spec);
  const std::vector<RunReport> reports = run_batch(scenarios, jobs);
  const BenchTable table = aggregate(reports);

  ensure_dir(a.out + "/runs");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const RunReport& r = reports[i];
    const int start_idx = static_cast<int>(i % static_cast<std::size_t>(spec.starts));
    const std::string name = r.method + "__" + r.trajectory + "__s" + std::to_string(start_idx) + ".json";
    write_text(a.out + "/runs/" + name, dump(report_to_json(r, a.raw)));
  }
  write_text(a.out + "/table.json", dump(table_to_json(table)));
  write_text(a.out + "/table.csv", table_to_csv(table));
  std::cout << table_to_csv(table);
  return kExitOk;
}

struct TuneGuidanceArgs {
  std::string config;
  std::string method;
  std::string trajectories;
  std::optional<int> starts;
  std::optional<int> points;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::string out = "tune_guidance_out";
};

int cmd_tune_guidance(const TuneGuidanceArgs& a) {
  const LabConfig c = load_or_default(a.config);
  const std::string mname = a.method.empty() ? c.tune_guidance.method : a.method;
  const Method m = checked_method(mname, c);
  if (m.use_mpc) throw UsageError("tune-guidance works on the reactive laws, not mpc");
  GuidanceTuneSpec spec;
  spec.base = m.guidance;
  const int points = a.points.value_or(c.tune_guidance.points);
  if (points < 1) throw UsageError("--points must be at least 1");
  spec.axes = c.tune_guidance.axes.empty() ? default_guidance_axes(m.guidance.law, points)
                                           : c.tune_guidance.axes;
  BatchSpec bs;
  bs.methods = {m};
  bs.starts = a.starts.value_or(c.batch.starts);
  if (bs.starts < 1) throw UsageError("--starts must be at least 1");
  bs.trajectories = load_glob(a.trajectories.empty() ? c.batch.trajectories : a.trajectories);
  bs.base = c.scenario;
  bs.seed = resolve_seed(a.seed, c.scenario.seed);
  const int jobs = a.jobs.value_or(c.batch.jobs);
  if (jobs < 1) throw UsageError("--jobs must be at least 1");
  try {
    for (const auto& ax : spec.axes) {
      GuidanceParams probe;
      set_guidance_param(probe, ax.name, 0.0);
    }
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("tune_guidance.axes: ") + e.what());
  }

  const GridResult g = tune_guidance(spec, expand_batch(bs), jobs);
  ensure_dir(a.out);
  write_text(a.out + "/grid.txt", grid_to_text(g));
  json best = json::object();
  for (std::size_t k = 0; k < g.names.size(); ++k) best[g.names[k]] = round_sig(g.best_point().values[k]);
  const json result{{"method", mname},
                    {"best", best},
                    {"pct_trajectories_with_interception", round_sig(g.best_point().primary)},
                    {"mean_interceptions_per_trajectory", round_sig(g.best_point().secondary)},
                    {"grid_points", g.points.size()}};
  write_text(a.out + "/best.json", dump(result));
  std::cout << dump(result);
  return kExitOk;
}

struct TuneFilterArgs {
  std::string config;
  std::string kind;
  std::string cov_mode;
  std::string observer;
  std::optional<int> logs;
  std::optional<int> max_iter;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> trajectories;  // optional target paths; mode-switching otherwise
  std::string out;
};

int cmd_tune_filter(const TuneFilterArgs& a) {
  const LabConfig c = load_or_default(a.config);
  FilterTuneSpec spec;
  spec.initial = c.scenario.filter;
  try {
    if (!a.kind.empty()) spec.initial.kind = filter_kind_from_string(a.kind);
    if (!a.cov_mode.empty()) spec.initial.cov_mode = covariance_mode_from_string(a.cov_mode);
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  spec.params = c.tune_filter.params;
  spec.bfgs.max_iter = a.max_iter.value_or(c.tune_filter.max_iter);
  if (spec.bfgs.max_iter < 0) throw UsageError("--max-iter must be nonnegative");
  spec.c_e = c.tune_filter.c_e;
  spec.warmup = c.tune_filter.warmup;
  const std::string observer = a.observer.empty() ? c.tune_filter.observer : a.observer;
  DetectionLogSpec ls;
  ls.sensor = c.scenario.sensor;
  if (observer == "hovering") ls.motion = ObserverMotion::Hovering;
  else if (observer == "maneuvering") ls.motion = ObserverMotion::Maneuvering;
  else throw UsageError("--observer must be hovering or maneuvering");
  const std::uint64_t seed = resolve_seed(a.seed, c.scenario.seed);

  std::vector<DetectionLog> logs;
  if (!a.trajectories.empty()) {
    for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
      logs.push_back(make_detection_log(*load_traj(a.trajectories[i]), mix_seed(seed, i), ls));
    }
  } else {
    const int n = a.logs.value_or(c.tune_filter.logs);
    if (n < 1) throw UsageError("--logs must be at least 1");
    for (int i = 0; i < n; ++i) {
      const auto tr = gen_mode_switching(mix_seed(seed, 1000 + static_cast<std::uint64_t>(i)));
      logs.push_back(make_detection_log(tr, mix_seed(seed, static_cast<std::uint64_t>(i)), ls));
    }
  }
  const FilterTuneResult r = tune_filter(spec, logs);
  const json result{{"initial_e_x", round_sig(r.initial_e_x)},
                    {"e_x", round_sig(r.e_x)},
                    {"iterations", r.trace.iterations},
                    {"evaluations", r.trace.evaluations},
                    {"params", filter_params_to_json(r.params)}};
  if (!a.out.empty()) write_text(a.out, dump(result));
  std::cout << dump(result);
  return kExitOk;
}

struct GenTrajArgs {
  std::string kind = "random";
  std::optional<std::uint64_t> seed;
  RandomTrajSpec random;
  double width = 16.0;
  double length = 40.0;
  double speed = 3.0;
  double duration = 100.0;
  double dt = 0.01;
  double altitude = 10.0;
  std::string out;
};

int cmd_gen_traj(const GenTrajArgs& a) {
  if (!(a.duration > 0 && a.dt > 0)) throw UsageError("--duration and --dt must be positive");
  Trajectory tr;
  if (a.kind == "lemniscate") {
    if (!(a.width > 0 && a.length > 0 && a.speed > 0)) {
      throw UsageError("--width, --length and --speed must be positive");
    }
    tr = gen_lemniscate(a.width, a.length, a.speed, a.duration, a.dt, a.altitude);
  } else if (a.kind == "random") {
    RandomTrajSpec s = a.random;
    s.duration = a.duration;
    s.dt = a.dt;
    if (s.mean_speed < 0 || !(s.max_speed > 0) || !(s.max_accel > 0)) {
      throw UsageError("speeds must be nonnegative and caps positive");
    }
    try {
      tr = gen_random(resolve_seed(a.seed, 1), s);
    } catch (const GenerationError& e) {
      throw ConfigError(e.what());
    }
  } else {
    throw UsageError("--kind must be random or lemniscate");
  }
  if (!a.out.empty()) {
    try {
      save_trajectory(tr, a.out);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  print_stats(stats(tr));
  return kExitOk;
}

int cmd_traj_stats(const std::vector<std::string>& files) {
  for (const auto& f : files) {
    if (files.size() > 1) std::printf("%s\n", f.c_str());
    print_stats(stats(*load_traj(f)));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pursuit and interception laboratory"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one scenario and write its report");
  run_cmd->add_option("config", run.config, "Scenario config (JSON)")->required();
  run_cmd->add_option("--method", run.method, "pp, pn, lpn, gpn, gpn1, epn or mpc");
  run_cmd->add_option("--seed", run.seed, "Seed (falls back to INTERCEPT_LAB_SEED, then the config)");
  run_cmd->add_flag("--truth-feed,!--no-truth-feed", run.truth_feed, "Guide on ground truth instead of the estimate");
  run_cmd->add_option("--out", run.out, "Report path (stdout when omitted)");
  run_cmd->add_flag("--raw", run.raw, "Full-precision numbers and raw logs");
  run_cmd->add_flag("--timing", run.timing, "Record per-cycle guidance compute time");

  BatchArgs batch;
  auto* batch_cmd = app.add_subcommand("batch", "Methods x trajectories x starts benchmark");
  batch_cmd->add_option("config", batch.config, "Scenario config (JSON)");
  batch_cmd->add_option("--methods", batch.methods, "Comma-separated methods")->delimiter(',');
  batch_cmd->add_option("--trajectories", batch.trajectories, "Trajectory file glob");
  batch_cmd->add_option("--starts", batch.starts, "Random starts per trajectory");
  batch_cmd->add_option("--jobs", batch.jobs, "Worker threads");
  batch_cmd->add_option("--seed", batch.seed, "Seed");
  batch_cmd->add_flag("--truth-feed,!--no-truth-feed", batch.truth_feed, "Guide on ground truth");
  batch_cmd->add_option("--out", batch.out, "Output directory")->capture_default_str();
  batch_cmd->add_flag("--raw", batch.raw, "Full-precision per-run reports");
  batch_cmd->add_flag("--timing", batch.timing, "Record compute time (reports are then not reproducible)");

  TuneGuidanceArgs tg;
  auto* tg_cmd = app.add_subcommand("tune-guidance", "Grid search of guidance gains");
  tg_cmd->add_option("config", tg.config, "Scenario config (JSON)");
  tg_cmd->add_option("--method", tg.method, "Law to tune");
  tg_cmd->add_option("--trajectories", tg.trajectories, "Trajectory file glob");
  tg_cmd->add_option("--starts", tg.starts, "Random starts per trajectory");
  tg_cmd->add_option("--points", tg.points, "Grid points per axis for the default axes");
  tg_cmd->add_option("--jobs", tg.jobs, "Worker threads");
  tg_cmd->add_option("--seed", tg.seed, "Seed");
  tg_cmd->add_option("--out", tg.out, "Output directory")->capture_default_str();

  TuneFilterArgs tf;
  auto* tf_cmd = app.add_subcommand("tune-filter", "Quasi-Newton filter tuning on detection logs");
  tf_cmd->add_option("config", tf.config, "Scenario config (JSON)");
  tf_cmd->add_option("--kind", tf.kind, "cv, ca or imm");
  tf_cmd->add_option("--cov-mode", tf.cov_mode, "reported, motion or static");
  tf_cmd->add_option("--observer", tf.observer, "hovering or maneuvering");
  tf_cmd->add_option("--logs", tf.logs, "Number of generated mode-switching logs");
  tf_cmd->add_option("--trajectory", tf.trajectories, "Target trajectory files instead of generated ones");
  tf_cmd->add_option("--max-iter", tf.max_iter, "Quasi-Newton iterations");
  tf_cmd->add_option("--seed", tf.seed, "Seed");
  tf_cmd->add_option("--out", tf.out, "Result path");

  GenTrajArgs gt;
  auto* gt_cmd = app.add_subcommand("gen-traj", "Generate a target trajectory");
  gt_cmd->add_option("--kind", gt.kind, "random or lemniscate")->capture_default_str();
  gt_cmd->add_option("--seed", gt.seed, "Seed for random trajectories");
  gt_cmd->add_option("--duration", gt.duration, "Seconds")->capture_default_str();
  gt_cmd->add_option("--dt", gt.dt, "Sample period")->capture_default_str();
  gt_cmd->add_option("--mean-speed", gt.random.mean_speed, "Random: target mean speed")->capture_default_str();
  gt_cmd->add_option("--max-speed", gt.random.max_speed, "Random: speed cap")->capture_default_str();
  gt_cmd->add_option("--max-accel", gt.random.max_accel, "Random: acceleration cap")->capture_default_str();
  gt_cmd->add_option("--width", gt.width, "Lemniscate: box width (y)")->capture_default_str();
  gt_cmd->add_option("--length", gt.length, "Lemniscate: box length (x)")->capture_default_str();
  gt_cmd->add_option("--speed", gt.speed, "Lemniscate: constant speed")->capture_default_str();
  gt_cmd->add_option("--altitude", gt.altitude, "Lemniscate: altitude")->capture_default_str();
  gt_cmd->add_option("--out", gt.out, "Output file");

  std::vector<std::string> stat_files;
  auto* ts_cmd = app.add_subcommand("traj-stats", "Print trajectory statistics");
  ts_cmd->add_option("files", stat_files, "Trajectory files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*batch_cmd) return cmd_batch(batch);
    if (*tg_cmd) return cmd_tune_guidance(tg);
    if (*tf_cmd) return cmd_tune_filter(tf);
    if (*gt_cmd) return cmd_gen_traj(gt);
    if (*ts_cmd) return cmd_traj_stats(stat_files);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return kExitSimulation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
