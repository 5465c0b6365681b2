#pragma once

// JSON scenario configuration and report serialization.
//
// Every key is optional; unknown keys are rejected so typos do not silently
// fall back to defaults.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "interceptlab/bench.hpp"

namespace interceptlab {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Reading

namespace cfg {

inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

inline double num(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  const std::string path = where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
    out = v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(path + ": expected a string");
    out = v.get<std::string>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    out = v.get<T>();
  } else {
    out = num(v, path);
  }
}

inline Vec3 vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
  return Vec3(num(v[0], where), num(v[1], where), num(v[2], where));
}

inline void read_vec3(const json& j, const char* key, Vec3& out, const std::string& where) {
  if (j.contains(key)) out = vec3(j.at(key), where + "." + key);
}

// A weight matrix: a 3-vector is the diagonal, a 3x3 nested array the full matrix.
inline void read_weight(const json& j, const char* key, Mat3& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  const std::string path = where + "." + key;
  if (v.is_array() && v.size() == 3 && v[0].is_array()) {
    for (int r = 0; r < 3; ++r) out.row(r) = vec3(v[static_cast<std::size_t>(r)], path).transpose();
  } else {
    out = vec3(v, path).asDiagonal();
  }
}

}  // namespace cfg

inline void apply_guidance_json(GuidanceParams& g, const json& j, const std::string& where = "guidance") {
  cfg::check_keys(j, where, {"G", "W", "k1", "k2", "v_r", "eps_v"});
  cfg::read(j, "G", g.G, where);
  cfg::read(j, "W", g.W, where);
  cfg::read(j, "k1", g.k1, where);
  cfg::read(j, "k2", g.k2, where);
  cfg::read(j, "v_r", g.v_r, where);
  cfg::read(j, "eps_v", g.eps_v, where);
}

inline void apply_interceptor_json(InterceptorParams& p, const json& j) {
  const std::string w = "interceptor";
  cfg::check_keys(j, w, {"v_max", "a_max", "heading_rate_max", "accel_lag", "linear_drag", "sim_dt",
                         "control_rate", "lost_timeout"});
  cfg::read_vec3(j, "v_max", p.limits.v_max, w);
  cfg::read_vec3(j, "a_max", p.limits.a_max, w);
  cfg::read(j, "heading_rate_max", p.heading_rate_max, w);
  cfg::read(j, "accel_lag", p.accel_lag, w);
  cfg::read(j, "linear_drag", p.linear_drag, w);
  cfg::read(j, "sim_dt", p.sim_dt, w);
  cfg::read(j, "control_rate", p.control_rate, w);
  cfg::read(j, "lost_timeout", p.lost_timeout, w);
}

inline void apply_net_json(NetGeometry& n, const json& j) {
  const std::string w = "net";
  cfg::check_keys(j, w, {"radius", "offset_below", "rearm_time", "plane"});
  cfg::read(j, "radius", n.radius, w);
  cfg::read(j, "offset_below", n.offset_below, w);
  cfg::read(j, "rearm_time", n.rearm_time, w);
  if (j.contains("plane")) {
    std::string s;
    cfg::read(j, "plane", s, w);
    try {
      n.plane = net_plane_from_string(s);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("net.plane: ") + e.what());
    }
  }
  if (!(n.radius > 0)) throw ConfigError("net.radius: must be positive");
}

inline void apply_sensor_json(SensorNoiseParams& s, const json& j) {
  const std::string w = "sensor";
  cfg::check_keys(j, w, {"sigma_l", "sigma_zeta3", "c_alpha", "sigma_t", "rate", "max_range",
                         "fov_gating", "fov_azimuth_halfwidth", "dropout_p"});
  cfg::read(j, "sigma_l", s.sigma_l, w);
  cfg::read(j, "sigma_zeta3", s.sigma_zeta3, w);
  cfg::read(j, "c_alpha", s.c_alpha, w);
  cfg::read(j, "sigma_t", s.sigma_t, w);
  cfg::read(j, "rate", s.rate, w);
  cfg::read(j, "max_range", s.max_range, w);
  cfg::read(j, "fov_gating", s.fov_gating, w);
  cfg::read(j, "fov_azimuth_halfwidth", s.fov_azimuth_halfwidth, w);
  cfg::read(j, "dropout_p", s.dropout_p, w);
}

inline void apply_filter_json(FilterParams& f, const json& j) {
  const std::string w = "filter";
  cfg::check_keys(j, w, {"kind", "sigma_a", "sigma_j", "sigma_pin", "p_cv_to_ca", "p_ca_to_cv",
                         "init_velocity_var", "init_acceleration_var", "cov_mode", "sigma_l",
                         "sigma_zeta3", "c_alpha", "sigma_alpha_static"});
  try {
    if (j.contains("kind")) {
      std::string s;
      cfg::read(j, "kind", s, w);
      f.kind = filter_kind_from_string(s);
    }
    if (j.contains("cov_mode")) {
      std::string s;
      cfg::read(j, "cov_mode", s, w);
      f.cov_mode = covariance_mode_from_string(s);
    }
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("filter: ") + e.what());
  }
  cfg::read(j, "sigma_a", f.sigma_a, w);
  cfg::read(j, "sigma_j", f.sigma_j, w);
  cfg::read(j, "sigma_pin", f.sigma_pin, w);
  cfg::read(j, "p_cv_to_ca", f.p_cv_to_ca, w);
  cfg::read(j, "p_ca_to_cv", f.p_ca_to_cv, w);
  cfg::read(j, "init_velocity_var", f.init.velocity_var, w);
  cfg::read(j, "init_acceleration_var", f.init.acceleration_var, w);
  cfg::read(j, "sigma_l", f.sigma_l, w);
  cfg::read(j, "sigma_zeta3", f.sigma_zeta3, w);
  cfg::read(j, "c_alpha", f.c_alpha, w);
  cfg::read(j, "sigma_alpha_static", f.sigma_alpha_static, w);
}

inline void apply_mpc_json(MpcParams& m, const json& j) {
  const std::string w = "mpc";
  cfg::check_keys(j, w, {"N", "dt", "W_e", "W_u", "qp"});
  cfg::read(j, "N", m.N, w);
  cfg::read(j, "dt", m.dt, w);
  cfg::read_weight(j, "W_e", m.W_e, w);
  cfg::read_weight(j, "W_u", m.W_u, w);
  if (j.contains("qp")) {
    const json& q = j.at("qp");
    const std::string wq = "mpc.qp";
    cfg::check_keys(q, wq, {"rho", "sigma", "alpha", "max_iter", "tol", "check_every",
                            "scaling_iters", "polish", "polish_trigger"});
    cfg::read(q, "rho", m.qp.rho, wq);
    cfg::read(q, "sigma", m.qp.sigma, wq);
    cfg::read(q, "alpha", m.qp.alpha, wq);
    cfg::read(q, "max_iter", m.qp.max_iter, wq);
    cfg::read(q, "tol", m.qp.tol, wq);
    cfg::read(q, "check_every", m.qp.check_every, wq);
    cfg::read(q, "scaling_iters", m.qp.scaling_iters, wq);
    cfg::read(q, "polish", m.qp.polish, wq);
    cfg::read(q, "polish_trigger", m.qp.polish_trigger, wq);
  }
}

struct StartConfig {
  std::optional<Vec3> position;  // fixed start; random otherwise
  double heading = 0.0;
  double min_distance = 10.0;
  double max_distance = 30.0;
};

struct BatchConfig {
  std::vector<std::string> methods{"pp", "lpn", "gpn", "epn", "mpc"};
  std::string trajectories;  // glob
  int starts = 5;
  int jobs = 1;
};

struct GuidanceTuneConfig {
  std::string method = "epn";
  int points = 20;
  std::vector<GridAxis> axes;  // empty: default axes for the law
};

struct FilterTuneConfig {
  std::vector<std::string> params;
  int max_iter = 50;
  double c_e = 1.0;
  double warmup = 2.0;
  std::string observer = "maneuvering";
  int logs = 3;
};

struct LabConfig {
  std::string trajectory;  // resolved against the config file's directory
  std::string method = "epn";
  std::optional<json> guidance_overrides;
  StartConfig start;
  Scenario scenario;  // trajectory and method filled in at run time
  BatchConfig batch;
  GuidanceTuneConfig tune_guidance;
  FilterTuneConfig tune_filter;
};

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? p : (base / path).lexically_normal().string();
}

inline LabConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
  cfg::check_keys(j, "config", {"trajectory", "method", "guidance", "seed", "duration", "truth_feed",
                                "record_timing", "check_invariants", "start", "interceptor", "net",
                                "sensor", "filter", "mpc", "batch", "tune_guidance", "tune_filter"});
  LabConfig c;
  Scenario& sc = c.scenario;
  cfg::read(j, "trajectory", c.trajectory, "config");
  c.trajectory = resolve_path(c.trajectory, base_dir);
  cfg::read(j, "method", c.method, "config");
  if (j.contains("guidance")) c.guidance_overrides = j.at("guidance");
  cfg::read(j, "seed", sc.seed, "config");
  cfg::read(j, "duration", sc.duration, "config");
  cfg::read(j, "truth_feed", sc.truth_feed, "config");
  cfg::read(j, "record_timing", sc.record_timing, "config");
  cfg::read(j, "check_invariants", sc.check_invariants, "config");
  if (!(sc.duration > 0)) throw ConfigError("config.duration: must be positive");
  if (j.contains("start")) {
    const json& s = j.at("start");
    cfg::check_keys(s, "start", {"position", "heading", "min_distance", "max_distance"});
    if (s.contains("position")) c.start.position = cfg::vec3(s.at("position"), "start.position");
    cfg::read(s, "heading", c.start.heading, "start");
    cfg::read(s, "min_distance", c.start.min_distance, "start");
    cfg::read(s, "max_distance", c.start.max_distance, "start");
    if (!(c.start.min_distance >= 0 && c.start.max_distance >= c.start.min_distance)) {
      throw ConfigError("start: need 0 <= min_distance <= max_distance");
    }
  }
  if (j.contains("interceptor")) apply_interceptor_json(sc.interceptor, j.at("interceptor"));
  if (j.contains("net")) apply_net_json(sc.net, j.at("net"));
  if (j.contains("sensor")) apply_sensor_json(sc.sensor, j.at("sensor"));
  if (j.contains("filter")) apply_filter_json(sc.filter, j.at("filter"));
  if (j.contains("mpc")) apply_mpc_json(sc.mpc, j.at("mpc"));
  if (j.contains("batch")) {
    const json& b = j.at("batch");
    cfg::check_keys(b, "batch", {"methods", "trajectories", "starts", "jobs"});
    if (b.contains("methods")) {
      if (!b.at("methods").is_array()) throw ConfigError("batch.methods: expected a list");
      c.batch.methods.clear();
      for (const auto& m : b.at("methods")) {
        if (!m.is_string()) throw ConfigError("batch.methods: expected strings");
        c.batch.methods.push_back(m.get<std::string>());
      }
    }
    cfg::read(b, "trajectories", c.batch.trajectories, "batch");
    c.batch.trajectories = resolve_path(c.batch.trajectories, base_dir);
    cfg::read(b, "starts", c.batch.starts, "batch");
    cfg::read(b, "jobs", c.batch.jobs, "batch");
  }
  if (j.contains("tune_guidance")) {
    const json& t = j.at("tune_guidance");
    cfg::check_keys(t, "tune_guidance", {"method", "points", "axes"});
    cfg::read(t, "method", c.tune_guidance.method, "tune_guidance");
    cfg::read(t, "points", c.tune_guidance.points, "tune_guidance");
    if (t.contains("axes")) {
      const json& axes = t.at("axes");
      if (!axes.is_object()) throw ConfigError("tune_guidance.axes: expected an object");
      for (auto it = axes.begin(); it != axes.end(); ++it) {
        const std::string w = "tune_guidance.axes." + it.key();
        GridAxis ax{it.key(), {}};
        if (it->is_array()) {
          for (const auto& v : *it) ax.values.push_back(cfg::num(v, w));
        } else {
          cfg::check_keys(*it, w, {"min", "max", "points", "scale"});
          double lo = 0, hi = 0;
          int n = c.tune_guidance.points;
          std::string scale = "linear";
          if (!it->contains("min") || !it->contains("max")) throw ConfigError(w + ": needs min and max");
          cfg::read(*it, "min", lo, w);
          cfg::read(*it, "max", hi, w);
          cfg::read(*it, "points", n, w);
          cfg::read(*it, "scale", scale, w);
          if (n < 1 || hi < lo) throw ConfigError(w + ": empty range");
          if (scale == "log") {
            if (!(lo > 0)) throw ConfigError(w + ": log scale needs positive bounds");
            ax.values = logspace(lo, hi, n);
          } else if (scale == "linear") {
            ax.values = linspace(lo, hi, n);
          } else {
            throw ConfigError(w + ".scale: expected linear or log");
          }
        }
        if (ax.values.empty()) throw ConfigError(w + ": empty range");
        c.tune_guidance.axes.push_back(std::move(ax));
      }
    }
  }
  if (j.contains("tune_filter")) {
    const json& t = j.at("tune_filter");
    const std::string w = "tune_filter";
    cfg::check_keys(t, w, {"params", "max_iter", "c_e", "warmup", "observer", "logs"});
    if (t.contains("params")) {
      for (const auto& p : t.at("params")) {
        if (!p.is_string()) throw ConfigError(w + ".params: expected strings");
        c.tune_filter.params.push_back(p.get<std::string>());
      }
    }
    cfg::read(t, "max_iter", c.tune_filter.max_iter, w);
    cfg::read(t, "c_e", c.tune_filter.c_e, w);
    cfg::read(t, "warmup", c.tune_filter.warmup, w);
    cfg::read(t, "observer", c.tune_filter.observer, w);
    cfg::read(t, "logs", c.tune_filter.logs, w);
  }
  try {
    sc.interceptor.validate();
    sc.sensor.validate();
    sc.mpc.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline LabConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

// Method by name with the config's guidance overrides applied.
inline Method configured_method(const std::string& name, const LabConfig& c) {
  Method m = method_from_name(name);
  if (c.guidance_overrides && !m.use_mpc) apply_guidance_json(m.guidance, *c.guidance_overrides);
  m.guidance.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Writing. Numbers carry 6 significant digits unless raw output is asked for.

inline double round_sig(double v, int digits = 6) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return std::strtod(buf, nullptr);
}

struct NumberFormat {
  bool raw = false;
  json operator()(double v) const {
    if (!std::isfinite(v)) return nullptr;
    return raw ? v : round_sig(v);
  }
  json operator()(const std::optional<double>& v) const { return v ? (*this)(*v) : json(nullptr); }
  json operator()(const Vec3& v) const { return json::array({(*this)(v.x()), (*this)(v.y()), (*this)(v.z())}); }
};

inline json report_to_json(const RunReport& r, bool raw = false) {
  const NumberFormat f{raw};
  json j;
  j["method"] = r.method;
  j["trajectory"] = r.trajectory;
  j["seed"] = r.seed;
  j["truth_feed"] = r.truth_feed;
  j["duration"] = f(r.duration);
  j["start"] = f(r.start);
  j["net"] = {{"radius", f(r.net.radius)},
              {"offset_below", f(r.net.offset_below)},
              {"rearm_time", f(r.net.rearm_time)},
              {"plane", to_string(r.net.plane)}};
  json events = json::array();
  for (const auto& e : r.events) {
    events.push_back({{"time", f(e.time)}, {"accuracy", f(e.accuracy)}, {"crossing_point", f(e.crossing_point)}});
  }
  j["events"] = events;
  j["scans"] = r.scans;
  j["detections"] = r.detections;
  j["recall"] = f(r.recall());
  j["lost_time"] = f(r.lost_time);
  j["mpc_nonconverged"] = r.mpc_nonconverged;
  j["invariant_violations"] = r.invariant_violations;
  j["state_limit_violations"] = r.state_limit_violations;
  if (!r.est_samples.empty()) {
    const ErrorMetrics m = metric_ex(r.est_samples);
    j["estimation"] = {{"samples", r.est_samples.size()}, {"e_x", f(m.e_x)}, {"e_p", f(m.e_p)}, {"e_v", f(m.e_v)}};
  } else {
    j["estimation"] = nullptr;
  }
  if (!r.compute_times.empty()) {
    double s = 0.0;
    for (double c : r.compute_times) s += c;
    j["mean_compute_time"] = f(s / static_cast<double>(r.compute_times.size()));
  } else {
    j["mean_compute_time"] = nullptr;
  }
  if (raw) {
    json est = json::array();
    for (const auto& s : r.est_samples) est.push_back({s.time, f(s.p_err), f(s.v_err)});
    j["est_samples"] = est;
    j["compute_times"] = r.compute_times;
  }
  return j;
}

inline json table_to_json(const BenchTable& t, bool raw = false) {
  const NumberFormat f{raw};
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"method", r.method},
                    {"trajectories", r.trajectories},
                    {"runs", r.runs},
                    {"pct_trajectories_with_interception", f(r.pct_trajectories_with_interception)},
                    {"mean_interceptions_per_trajectory", f(r.mean_interceptions_per_trajectory)},
                    {"mean_time_to_first", f(r.mean_time_to_first)},
                    {"mean_accuracy_all", f(r.mean_accuracy_all)},
                    {"mean_accuracy_first", f(r.mean_accuracy_first)},
                    {"mean_compute_time", f(r.mean_compute_time)},
                    {"e_x", f(r.e_x)},
                    {"e_p", f(r.e_p)},
                    {"e_v", f(r.e_v)},
                    {"trajectories_with_interception", r.trajectories_with_interception},
                    {"mean_time_to_first_imputed", f(r.mean_time_to_first_imputed)}});
  }
  return json{{"rows", rows}};
}

inline std::string table_to_csv(const BenchTable& t) {
  std::ostringstream os;
  os << "method,trajectories,runs,pct_trajectories_with_interception,mean_interceptions_per_trajectory,"
        "mean_time_to_first,mean_accuracy_all,mean_accuracy_first,mean_compute_time,e_x,e_p,e_v,"
        "trajectories_with_interception,mean_time_to_first_imputed\n";
  auto cell = [&](const std::optional<double>& v) {
    if (v && std::isfinite(*v)) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6g", *v);
      os << buf;
    }
  };
  for (const auto& r : t.rows) {
    os << r.method << ',' << r.trajectories << ',' << r.runs << ',';
    cell(r.pct_trajectories_with_interception);
    os << ',';
    cell(r.mean_interceptions_per_trajectory);
    for (const auto& v : {r.mean_time_to_first, r.mean_accuracy_all, r.mean_accuracy_first,
                          r.mean_compute_time, r.e_x, r.e_p, r.e_v}) {
      os << ',';
      cell(v);
    }
    os << ',' << r.trajectories_with_interception << ',';
    cell(r.mean_time_to_first_imputed);
    os << '\n';
  }
  return os.str();
}

// Whitespace-separated grid audit: one row per grid point, best marked.
inline std::string grid_to_text(const GridResult& g) {
  std::ostringstream os;
  for (const auto& n : g.names) os << n << ' ';
  os << "primary secondary best\n";
  char buf[64];
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    for (double v : g.points[i].values) {
      std::snprintf(buf, sizeof buf, "%.6g ", v);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.6g %.6g", g.points[i].primary, g.points[i].secondary);
    os << buf << ' ' << (i == g.best ? 1 : 0) << '\n';
  }
  return os.str();
}

inline json filter_params_to_json(const FilterParams& p) {
  return {{"kind", to_string(p.kind)},
          {"cov_mode", to_string(p.cov_mode)},
          {"sigma_a", round_sig(p.sigma_a)},
          {"sigma_j", round_sig(p.sigma_j)},
          {"sigma_pin", round_sig(p.sigma_pin)},
          {"p_cv_to_ca", round_sig(p.p_cv_to_ca)},
          {"p_ca_to_cv", round_sig(p.p_ca_to_cv)},
          {"sigma_l", round_sig(p.sigma_l)},
          {"sigma_zeta3", round_sig(p.sigma_zeta3)},
          {"c_alpha", round_sig(p.c_alpha)},
          {"sigma_alpha_static", round_sig(p.sigma_alpha_static)}};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace interceptlab
