#pragma once

// Metrics, aggregation and tuning on top of the simulator.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "interceptlab/sim.hpp"

namespace interceptlab {

// ---------------------------------------------------------------------------
// Estimation error metric

struct ErrorMetrics {
  double e_x = 0.0;
  double e_p = 0.0;
  double e_v = 0.0;
};

inline ErrorMetrics metric_ex(const std::vector<EstErrorSample>& samples, double c_e = 1.0) {
  if (samples.empty()) throw MetricError("metric_ex: no samples");
  double sp = 0.0, sv = 0.0;
  for (const auto& s : samples) {
    sp += s.p_err.squaredNorm();
    sv += s.v_err.squaredNorm();
  }
  const double n = static_cast<double>(samples.size());
  return {std::sqrt((sp + c_e * c_e * sv) / n), std::sqrt(sp / n), std::sqrt(sv / n)};
}

// ---------------------------------------------------------------------------
// Aggregation

struct BenchRow {
  std::string method;
  int trajectories = 0;
  int runs = 0;
  double pct_trajectories_with_interception = 0.0;
  double mean_interceptions_per_trajectory = 0.0;
  std::optional<double> mean_time_to_first;
  std::optional<double> mean_accuracy_all;
  std::optional<double> mean_accuracy_first;
  std::optional<double> mean_compute_time;
  std::optional<double> e_x;
  std::optional<double> e_p;
  std::optional<double> e_v;
  int trajectories_with_interception = 0;  // count behind the two "first" means
  double mean_time_to_first_imputed = 0.0;  // no-event runs count as the full duration
};

struct BenchTable {
  std::vector<BenchRow> rows;  // sorted by method name

  const BenchRow* find(const std::string& method) const {
    for (const auto& r : rows) {
      if (r.method == method) return &r;
    }
    return nullptr;
  }
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Canonical order so reductions do not depend on input order.
inline bool report_less(const RunReport* a, const RunReport* b) {
  return std::make_tuple(a->seed, a->start.x(), a->start.y(), a->start.z(), a->events.size()) <
         std::make_tuple(b->seed, b->start.x(), b->start.y(), b->start.z(), b->events.size());
}

}  // namespace detail

// Per-trajectory reduction over starts, then means over trajectories.
inline BenchTable aggregate(const std::vector<RunReport>& reports) {
  std::map<std::string, std::map<std::string, std::vector<const RunReport*>>> groups;
  for (const auto& r : reports) groups[r.method][r.trajectory].push_back(&r);

  BenchTable table;
  for (auto& [method, by_traj] : groups) {
    BenchRow row;
    row.method = method;
    std::vector<double> frac, count, ttf, ttf_imp, acc_all, acc_first;
    double compute_sum = 0.0;
    std::size_t compute_n = 0;
    std::vector<EstErrorSample> est;
    for (auto& [traj, runs] : by_traj) {
      std::sort(runs.begin(), runs.end(), detail::report_less);
      ++row.trajectories;
      int with = 0;
      std::vector<double> t_count, t_ttf, t_ttf_imp, t_acc_all, t_acc_first;
      for (const RunReport* r : runs) {
        ++row.runs;
        t_count.push_back(static_cast<double>(r->events.size()));
        if (!r->events.empty()) {
          ++with;
          t_ttf.push_back(r->events.front().time);
          t_ttf_imp.push_back(r->events.front().time);
          t_acc_first.push_back(r->events.front().accuracy);
          for (const auto& e : r->events) t_acc_all.push_back(e.accuracy);
        } else {
          t_ttf_imp.push_back(r->duration);
        }
        for (double c : r->compute_times) compute_sum += c;
        compute_n += r->compute_times.size();
        est.insert(est.end(), r->est_samples.begin(), r->est_samples.end());
      }
      frac.push_back(static_cast<double>(with) / static_cast<double>(runs.size()));
      count.push_back(detail::mean_of(t_count));
      ttf_imp.push_back(detail::mean_of(t_ttf_imp));
      if (with > 0) {
        ++row.trajectories_with_interception;
        ttf.push_back(detail::mean_of(t_ttf));
        acc_all.push_back(detail::mean_of(t_acc_all));
        acc_first.push_back(detail::mean_of(t_acc_first));
      }
    }
    row.pct_trajectories_with_interception = 100.0 * detail::mean_of(frac);
    row.mean_interceptions_per_trajectory = detail::mean_of(count);
    row.mean_time_to_first_imputed = detail::mean_of(ttf_imp);
    if (!ttf.empty()) {
      row.mean_time_to_first = detail::mean_of(ttf);
      row.mean_accuracy_all = detail::mean_of(acc_all);
      row.mean_accuracy_first = detail::mean_of(acc_first);
    }
    if (compute_n > 0) row.mean_compute_time = compute_sum / static_cast<double>(compute_n);
    if (!est.empty()) {
      const ErrorMetrics m = metric_ex(est);
      row.e_x = m.e_x;
      row.e_p = m.e_p;
      row.e_v = m.e_v;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Parallel map over [0, n) with a bounded worker pool. Results land at their
// index, so the output does not depend on scheduling.

template <class T>
std::vector<T> parallel_map(std::size_t n, int jobs, const std::function<T(std::size_t)>& fn) {
  std::vector<std::optional<T>> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> result;
  result.reserve(n);
  for (auto& o : out) result.push_back(std::move(*o));
  return result;
}

// ---------------------------------------------------------------------------
// Batch protocol: methods x trajectories x starts.

struct NamedTrajectory {
  std::string name;
  std::shared_ptr<const Trajectory> trajectory;
};

// splitmix64 finalizer
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct BatchSpec {
  std::vector<Method> methods;
  std::vector<NamedTrajectory> trajectories;
  int starts = 5;
  Scenario base;  // everything except trajectory, method, start and seed
  std::uint64_t seed = 1;
};

// Starts and noise seeds depend on (seed, trajectory, start) only, so every
// method faces the same set of engagements.
inline std::vector<Scenario> expand_batch(const BatchSpec& spec) {
  if (spec.starts < 1) throw ParameterError("batch: starts must be at least 1");
  if (spec.trajectories.empty()) throw ParameterError("batch: no trajectories");
  std::vector<Scenario> out;
  for (const Method& m : spec.methods) {
    for (std::size_t ti = 0; ti < spec.trajectories.size(); ++ti) {
      const NamedTrajectory& nt = spec.trajectories[ti];
      for (int si = 0; si < spec.starts; ++si) {
        Scenario sc = spec.base;
        sc.trajectory = nt.trajectory;
        sc.trajectory_name = nt.name;
        sc.method = m;
        const std::uint64_t s = mix_seed(mix_seed(spec.seed, ti), static_cast<std::uint64_t>(si));
        sc.seed = s;
        sc.start = random_start(*nt.trajectory, mix_seed(s, 7));
        out.push_back(std::move(sc));
      }
    }
  }
  return out;
}

inline std::vector<RunReport> run_batch(const std::vector<Scenario>& scenarios, int jobs) {
  return parallel_map<RunReport>(scenarios.size(), jobs,
                                 [&](std::size_t i) { return run_scenario(scenarios[i]); });
}

// ---------------------------------------------------------------------------
// Grid search with a lexicographic objective.

struct GridAxis {
  std::string name;
  std::vector<double> values;
};

inline std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw ParameterError("linspace: n must be positive");
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
  return v;
}

inline std::vector<double> logspace(double lo, double hi, int n) {
  if (!(lo > 0 && hi > 0)) throw ParameterError("logspace: bounds must be positive");
  std::vector<double> v = linspace(std::log(lo), std::log(hi), n);
  for (double& x : v) x = std::exp(x);
  return v;
}

struct GridPoint {
  std::vector<double> values;  // one per axis, declared order
  double primary = 0.0;
  double secondary = 0.0;
};

struct GridResult {
  std::vector<std::string> names;
  std::vector<GridPoint> points;  // full grid, row-major over the axes
  std::size_t best = 0;

  const GridPoint& best_point() const { return points.at(best); }
};

using GridObjective = std::function<std::pair<double, double>(const std::vector<double>&)>;

// Maximizes (primary, secondary); exact ties go to the lowest tuple.
inline GridResult grid_search(const std::vector<GridAxis>& axes, const GridObjective& objective,
                              int jobs = 1) {
  if (axes.empty()) throw TuningError("grid_search: no axes");
  std::size_t total = 1;
  for (const auto& a : axes) {
    if (a.values.empty()) throw TuningError("grid_search: empty axis '" + a.name + "'");
    total *= a.values.size();
  }
  GridResult res;
  for (const auto& a : axes) res.names.push_back(a.name);
  std::vector<std::vector<double>> tuples(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    std::vector<double> t(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      t[k] = axes[k].values[rem % axes[k].values.size()];
      rem /= axes[k].values.size();
    }
    tuples[idx] = std::move(t);
  }
  const auto scores = parallel_map<std::pair<double, double>>(
      total, jobs, [&](std::size_t i) { return objective(tuples[i]); });
  for (std::size_t i = 0; i < total; ++i) {
    res.points.push_back({tuples[i], scores[i].first, scores[i].second});
  }
  for (std::size_t i = 1; i < total; ++i) {
    const GridPoint& p = res.points[i];
    const GridPoint& b = res.points[res.best];
    if (p.primary > b.primary || (p.primary == b.primary && p.secondary > b.secondary) ||
        (p.primary == b.primary && p.secondary == b.secondary && p.values < b.values)) {
      res.best = i;
    }
  }
  return res;
}

inline void set_guidance_param(GuidanceParams& g, const std::string& name, double value) {
  if (name == "G") g.G = value;
  else if (name == "W") g.W = value;
  else if (name == "k1") g.k1 = value;
  else if (name == "k2") g.k2 = value;
  else if (name == "v_r") g.v_r = value;
  else throw ParameterError("unknown guidance parameter '" + name + "' (expected G, W, k1, k2, v_r)");
}

// Default search axes around the preset gains: one decade either side
// (log-spaced) for gains, linear for W and v_r.
inline std::vector<GridAxis> default_guidance_axes(GuidanceLaw law, int points = 20) {
  switch (law) {
    case GuidanceLaw::PP: return {{"G", logspace(0.083, 8.3, points)}};
    case GuidanceLaw::PN: return {{"G", linspace(1.0, 10.0, points)}};
    case GuidanceLaw::LPN: return {{"G", logspace(1.97, 197.0, points)}};
    case GuidanceLaw::EPN:
      return {{"G", logspace(1.97, 197.0, points)}, {"W", linspace(0.0, 0.5, points)}};
    case GuidanceLaw::GPN:
      return {{"k1", logspace(6.95, 695.0, points)},
              {"k2", logspace(0.58, 58.0, points)},
              {"v_r", linspace(-12.0, -1.0, points)}};
  }
  return {};
}

struct GuidanceTuneSpec {
  GuidanceParams base;
  std::vector<GridAxis> axes;
};

// Scores each grid point on the scenario set: primary = percentage of
// trajectories with an interception, secondary = interceptions per trajectory.
inline GridResult tune_guidance(const GuidanceTuneSpec& spec, const std::vector<Scenario>& scenarios,
                                int jobs = 1) {
  if (scenarios.empty()) throw TuningError("tune_guidance: no scenarios");
  GuidanceParams probe = spec.base;
  for (const auto& a : spec.axes) set_guidance_param(probe, a.name, a.values.front());
  return grid_search(
      spec.axes,
      [&](const std::vector<double>& values) {
        GuidanceParams g = spec.base;
        for (std::size_t k = 0; k < values.size(); ++k) set_guidance_param(g, spec.axes[k].name, values[k]);
        g.validate();
        std::vector<RunReport> reps;
        for (Scenario sc : scenarios) {
          sc.method.use_mpc = false;
          sc.method.guidance = g;
          sc.record_timing = false;
          reps.push_back(run_scenario(sc));
        }
        const BenchTable t = aggregate(reps);
        double pct = 0.0, cnt = 0.0;
        for (const auto& r : t.rows) {
          pct += r.pct_trajectories_with_interception;
          cnt += r.mean_interceptions_per_trajectory;
        }
        const double n = static_cast<double>(t.rows.size());
        return std::make_pair(pct / n, cnt / n);
      },
      jobs);
}

// ---------------------------------------------------------------------------
// Quasi-Newton minimization with numeric gradients.

struct BfgsSettings {
  int max_iter = 50;
  double grad_step = 1e-4;  // relative central-difference step
  double grad_tol = 1e-6;
  double f_tol = 1e-10;
  double armijo_c = 1e-4;
  int max_backtracks = 30;
};

struct BfgsResult {
  VecX x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::vector<double> history;  // objective after each accepted iteration, starting with f(x0)
};

inline VecX numeric_gradient(const std::function<double(const VecX&)>& f, const VecX& x,
                             double rel_step, int* evals = nullptr) {
  VecX g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    VecX xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  if (evals) *evals += 2 * static_cast<int>(x.size());
  return g;
}

inline BfgsResult bfgs_minimize(const std::function<double(const VecX&)>& f, const VecX& x0,
                                const BfgsSettings& s = {}) {
  BfgsResult res;
  res.x = x0;
  res.f = f(x0);
  res.evaluations = 1;
  if (!std::isfinite(res.f)) throw TuningError("bfgs: objective is not finite at the start");
  res.history.push_back(res.f);
  if (s.max_iter <= 0) return res;

  const Eigen::Index n = x0.size();
  MatX H = MatX::Identity(n, n);
  VecX g = numeric_gradient(f, res.x, s.grad_step, &res.evaluations);
  for (int it = 0; it < s.max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < s.grad_tol) break;
    VecX d = -H * g;
    if (d.dot(g) >= 0.0) {
      H.setIdentity();
      d = -g;
    }
    double step = 1.0;
    VecX x_new;
    double f_new = res.f;
    bool accepted = false;
    for (int b = 0; b < s.max_backtracks; ++b) {
      x_new = res.x + step * d;
      f_new = f(x_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= res.f + s.armijo_c * step * g.dot(d)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const VecX g_new = numeric_gradient(f, x_new, s.grad_step, &res.evaluations);
    const VecX sv = x_new - res.x;
    const VecX yv = g_new - g;
    const double f_old = res.f;
    res.x = x_new;
    res.f = f_new;
    g = g_new;
    res.iterations = it + 1;
    res.history.push_back(res.f);
    const double sy = sv.dot(yv);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const MatX I = MatX::Identity(n, n);
      H = (I - rho * sv * yv.transpose()) * H * (I - rho * yv * sv.transpose()) +
          rho * sv * sv.transpose();
    }
    if (std::abs(f_old - f_new) <= s.f_tol * std::max(1.0, std::abs(f_old))) break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Detection logs and filter tuning.

struct LogEntry {
  double time = 0.0;
  std::optional<Detection> detection;
  Vec3 p_true = Vec3::Zero();
  Vec3 v_true = Vec3::Zero();
};

using DetectionLog = std::vector<LogEntry>;

inline std::vector<EstErrorSample> replay(const DetectionLog& log, const FilterParams& params,
                                          double warmup = 2.0) {
  TargetTracker tracker(params);
  std::vector<EstErrorSample> out;
  double t_init = 0.0;
  for (const auto& e : log) {
    if (e.detection) {
      const bool first = !tracker.initialized();
      tracker.update(*e.detection);
      if (first) t_init = e.time;
    } else {
      tracker.predict_to(e.time);
    }
    if (!tracker.initialized() || e.time - t_init < warmup) continue;
    const TargetStateCA x = tracker.estimate().state();
    out.push_back({e.time, x.p - e.p_true, x.v - e.v_true});
  }
  return out;
}

inline double replay_ex(const std::vector<DetectionLog>& logs, const FilterParams& params,
                        double c_e = 1.0, double warmup = 2.0) {
  std::vector<EstErrorSample> all;
  for (const auto& log : logs) {
    const auto s = replay(log, params, warmup);
    all.insert(all.end(), s.begin(), s.end());
  }
  return metric_ex(all, c_e).e_x;
}

// Names of the filter parameters tuned in transformed coordinates.
inline std::vector<std::string> default_tuned_params(const FilterParams& p) {
  std::vector<std::string> names;
  if (p.kind != FilterKind::CA) names.push_back("sigma_a");
  if (p.kind != FilterKind::CV) names.push_back("sigma_j");
  if (p.kind == FilterKind::IMM) {
    names.push_back("p_cv_to_ca");
    names.push_back("p_ca_to_cv");
  }
  switch (p.cov_mode) {
    case CovarianceMode::Reported: break;
    case CovarianceMode::MotionDependent:
      names.push_back("sigma_zeta3");
      names.push_back("c_alpha");
      break;
    case CovarianceMode::Static:  // sigma_alpha_static stays as configured
      names.push_back("sigma_zeta3");
      break;
  }
  return names;
}

namespace detail {

inline double& filter_field(FilterParams& p, const std::string& name) {
  if (name == "sigma_a") return p.sigma_a;
  if (name == "sigma_j") return p.sigma_j;
  if (name == "sigma_zeta3") return p.sigma_zeta3;
  if (name == "c_alpha") return p.c_alpha;
  if (name == "sigma_alpha_static") return p.sigma_alpha_static;
  if (name == "p_cv_to_ca") return p.p_cv_to_ca;
  if (name == "p_ca_to_cv") return p.p_ca_to_cv;
  throw ParameterError("unknown filter parameter '" + name + "'");
}

inline bool is_probability(const std::string& name) {
  return name == "p_cv_to_ca" || name == "p_ca_to_cv";
}

inline double to_internal(const std::string& name, double v) {
  if (is_probability(name)) {
    const double p = std::clamp(v, 1e-9, 1.0 - 1e-9);
    return std::log(p / (1.0 - p));
  }
  return std::log(std::max(v, 1e-12));
}

inline double from_internal(const std::string& name, double u) {
  return is_probability(name) ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u);
}

}  // namespace detail

struct FilterTuneSpec {
  FilterParams initial;
  std::vector<std::string> params;  // empty: default_tuned_params(initial)
  BfgsSettings bfgs;
  double c_e = 1.0;
  double warmup = 2.0;
};

struct FilterTuneResult {
  FilterParams params;
  double e_x = 0.0;
  double initial_e_x = 0.0;
  BfgsResult trace;
};

inline FilterTuneResult tune_filter(const FilterTuneSpec& spec, const std::vector<DetectionLog>& logs) {
  if (logs.empty()) throw TuningError("tune_filter: empty dataset");
  const std::vector<std::string> names =
      spec.params.empty() ? default_tuned_params(spec.initial) : spec.params;
  FilterParams probe = spec.initial;
  VecX u0(static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    u0[static_cast<Eigen::Index>(k)] = detail::to_internal(names[k], detail::filter_field(probe, names[k]));
  }
  auto decode = [&](const VecX& u) {
    FilterParams p = spec.initial;
    for (std::size_t k = 0; k < names.size(); ++k) {
      detail::filter_field(p, names[k]) = detail::from_internal(names[k], u[static_cast<Eigen::Index>(k)]);
    }
    return p;
  };
  auto objective = [&](const VecX& u) {
    try {
      return replay_ex(logs, decode(u), spec.c_e, spec.warmup);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  FilterTuneResult res;
  res.initial_e_x = objective(u0);
  if (!std::isfinite(res.initial_e_x)) {
    throw TuningError("tune_filter: objective is not finite at the initial parameters");
  }
  if (spec.bfgs.max_iter <= 0 || names.empty()) {
    res.params = spec.initial;
    res.e_x = res.initial_e_x;
    res.trace.x = u0;
    res.trace.f = res.e_x;
    res.trace.history.push_back(res.e_x);
    return res;
  }
  res.trace = bfgs_minimize(objective, u0, spec.bfgs);
  res.params = decode(res.trace.x);
  res.e_x = res.trace.f;
  return res;
}

// Synthetic tracking dataset: a target alternating constant-velocity and
// constant-acceleration segments at constant altitude, seen from a distance
// sweeping 6..24 m by an observer that either holds its attitude (hovering)
// or swings it around (maneuvering).
enum class ObserverMotion { Hovering, Maneuvering };

struct ModeSwitchSpec {
  double segment = 10.0;   // s per CV or CA segment
  int segments = 12;
  double dt = 0.01;
  // CA segment acceleration magnitude range (m/s^2); 10 s of constant
  // acceleration under an 8 m/s cap leaves little room above 1.5
  double min_accel = 0.5;
  double max_accel = 1.5;
  double max_speed = 8.0;
  double min_speed = 0.0;
  double altitude = 10.0;
};

inline Trajectory gen_mode_switching(std::uint64_t seed, const ModeSwitchSpec& spec = {}) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const long per_seg = std::lround(spec.segment / spec.dt);
  Trajectory tr;
  tr.dt = spec.dt;
  Vec3 p(0.0, 0.0, spec.altitude);
  const double heading0 = 2.0 * M_PI * u01(rng);
  Vec3 v = 4.0 * Vec3(std::cos(heading0), std::sin(heading0), 0.0);
  tr.positions.push_back(p);
  for (int s = 0; s < spec.segments; ++s) {
    Vec3 a = Vec3::Zero();
    if (s % 2 == 1) {
      bool ok = false;
      for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
        const double mag = spec.min_accel + (spec.max_accel - spec.min_accel) * u01(rng);
        const double az = 2.0 * M_PI * u01(rng);
        a = mag * Vec3(std::cos(az), std::sin(az), 0.0);
        ok = true;
        for (long k = 1; k <= per_seg && ok; ++k) {
          const double speed = (v + a * static_cast<double>(k) * spec.dt).norm();
          ok = speed <= spec.max_speed && speed >= spec.min_speed;
        }
      }
      if (!ok) throw GenerationError("gen_mode_switching: no feasible acceleration segment");
    }
    const Vec3 p0 = p, v0 = v;
    for (long k = 1; k <= per_seg; ++k) {
      const double t = static_cast<double>(k) * spec.dt;
      p = p0 + v0 * t + 0.5 * a * t * t;
      tr.positions.push_back(p);
    }
    v = v0 + a * spec.segment;
  }
  tr.validate();
  return tr;
}

struct DetectionLogSpec {
  ObserverMotion motion = ObserverMotion::Maneuvering;
  SensorNoiseParams sensor;
  double min_range = 6.0;      // observer-target distance sweeps this band
  double max_range = 24.0;
  double range_period = 40.0;  // s
  double bearing_rate = 0.05;  // rad/s, slow drift of the viewing direction
  double max_body_rate = 2.2;  // rad/s per axis, maneuvering peak
};

// Samples the log at the sensor rate over the whole trajectory.
inline DetectionLog make_detection_log(const Trajectory& tr, std::uint64_t seed,
                                       const DetectionLogSpec& spec = {}) {
  spec.sensor.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  // per-axis attitude oscillation, amplitude set by the peak rate
  Vec3 freq, phase, amp;
  for (int i = 0; i < 3; ++i) {
    freq[i] = 0.2 + 0.3 * u01(rng);
    phase[i] = 2.0 * M_PI * u01(rng);
    amp[i] = spec.max_body_rate / (2.0 * M_PI * freq[i]);
  }
  const double range_phase = 2.0 * M_PI * u01(rng);
  const double bearing0 = 2.0 * M_PI * u01(rng);
  const double t_end = tr.end_time();
  const double step = 1.0 / spec.sensor.rate;
  DetectionLog log;
  for (long k = 0;; ++k) {
    const double t = tr.t0 + static_cast<double>(k) * step;
    if (t > t_end + 1e-9) break;
    const Trajectory::Sample truth = tr.at(t);
    const double mid = 0.5 * (spec.min_range + spec.max_range);
    const double half = 0.5 * (spec.max_range - spec.min_range);
    const double dist = mid + half * std::sin(2.0 * M_PI * t / spec.range_period + range_phase);
    const double bearing = bearing0 + spec.bearing_rate * t;
    const double el = -0.15;  // observer slightly above the target
    ObserverState obs;
    obs.t = truth.p - dist * Vec3(std::cos(bearing) * std::cos(el), std::sin(bearing) * std::cos(el),
                                  std::sin(el));
    obs.sigma_t = spec.sensor.sigma_t * spec.sensor.sigma_t * Mat3::Identity();
    if (spec.motion == ObserverMotion::Maneuvering) {
      Vec3 ang, rate;
      for (int i = 0; i < 3; ++i) {
        const double w = 2.0 * M_PI * freq[i];
        ang[i] = amp[i] * std::sin(w * t + phase[i]);
        rate[i] = amp[i] * w * std::cos(w * t + phase[i]);
      }
      obs.R_m = Rotation3::from_ypr(ang.z(), ang.y(), ang.x());
      obs.heading = ang.z();
      obs.omega = rate;
    }
    LogEntry e;
    e.time = t;
    e.p_true = truth.p;
    e.v_true = truth.v;
    e.detection = detect(t, truth.p, obs, spec.sensor, rng);
    log.push_back(std::move(e));
  }
  return log;
}

}  // namespace interceptlab
