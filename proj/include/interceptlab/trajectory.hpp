#pragma once

// Uniformly sampled target trajectories: statistics, a random spline
// generator, the constant-speed figure-eight, and the CSV file format
// (header `t,x,y,z`, one sample per line, uniform dt).

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "interceptlab/numcore.hpp"

namespace interceptlab {

struct Trajectory {
  double t0 = 0.0;
  double dt = 0.01;
  std::vector<Vec3> positions;

  std::size_t size() const { return positions.size(); }
  double duration() const {
    return positions.empty() ? 0.0 : dt * static_cast<double>(positions.size() - 1);
  }
  double end_time() const { return t0 + duration(); }
  double time(std::size_t i) const { return t0 + dt * static_cast<double>(i); }

  void validate() const {
    if (!(dt > 0.0)) throw ParameterError("Trajectory: dt must be positive");
    if (positions.size() < 3) throw ParameterError("Trajectory: need at least 3 samples");
    for (const auto& p : positions) {
      if (!p.allFinite()) throw ParameterError("Trajectory: non-finite sample");
    }
  }

  // Central differences in the interior, one-sided at the ends.
  Vec3 velocity(std::size_t i) const {
    const std::size_t n = positions.size();
    if (i == 0) return (positions[1] - positions[0]) / dt;
    if (i + 1 >= n) return (positions[n - 1] - positions[n - 2]) / dt;
    return (positions[i + 1] - positions[i - 1]) / (2.0 * dt);
  }

  Vec3 acceleration(std::size_t i) const {
    const std::size_t n = positions.size();
    const std::size_t c = std::clamp<std::size_t>(i, 1, n - 2);
    return (positions[c + 1] - 2.0 * positions[c] + positions[c - 1]) / (dt * dt);
  }

  struct Sample {
    Vec3 p, v, a;
  };

  // Linear interpolation of position and the differenced channels at t
  // (clamped to the sampled interval).
  Sample at(double t) const {
    const double s = std::clamp((t - t0) / dt, 0.0, static_cast<double>(positions.size() - 1));
    std::size_t i = static_cast<std::size_t>(std::floor(s));
    if (i + 1 >= positions.size()) i = positions.size() - 2;
    const double f = s - static_cast<double>(i);
    auto lerp = [f](const Vec3& a, const Vec3& b) -> Vec3 { return (1.0 - f) * a + f * b; };
    return {lerp(positions[i], positions[i + 1]), lerp(velocity(i), velocity(i + 1)),
            lerp(acceleration(i), acceleration(i + 1))};
  }
};

struct TrajStats {
  double mean_speed = 0.0;
  double max_speed = 0.0;
  double mean_accel = 0.0;
  double max_accel = 0.0;
  double duration = 0.0;
  Vec3 extents = Vec3::Zero();
};

inline TrajStats stats(const Trajectory& tr) {
  tr.validate();
  TrajStats s;
  s.duration = tr.duration();
  const std::size_t n = tr.size();
  double speed_sum = 0.0, accel_sum = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double sp = tr.velocity(i).norm();
    const double ac = tr.acceleration(i).norm();
    speed_sum += sp;
    accel_sum += ac;
    s.max_speed = std::max(s.max_speed, sp);
    s.max_accel = std::max(s.max_accel, ac);
  }
  const double interior = static_cast<double>(n - 2);
  s.mean_speed = speed_sum / interior;
  s.mean_accel = accel_sum / interior;
  Vec3 lo = tr.positions.front(), hi = tr.positions.front();
  for (const auto& p : tr.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  s.extents = hi - lo;
  return s;
}

struct RandomTrajSpec {
  double duration = 100.0;
  Vec3 arena = Vec3(50, 50, 10);     // extents of the box waypoints are drawn from
  double base_altitude = 10.0;       // arena center height
  double mean_speed = 4.1;
  double max_speed = 8.0;
  double max_accel = 11.0;
  double dt = 0.01;
  double speed_spread = 0.5;         // per-segment speed drawn from mean*(1 +- spread)
  double min_waypoint_spacing = 8.0;

  void validate() const {
    if (!(duration > 0) || !(dt > 0)) throw ParameterError("RandomTrajSpec: duration and dt must be positive");
    if (!(mean_speed >= 0)) throw ParameterError("RandomTrajSpec: mean_speed must be nonnegative");
    if (mean_speed > 0) {
      if (!(max_speed >= mean_speed)) throw ParameterError("RandomTrajSpec: max_speed must be >= mean_speed");
      if (!(max_accel > 0)) throw ParameterError("RandomTrajSpec: max_accel must be positive");
      if (!((arena.array() >= 0).all() && arena.head<2>().minCoeff() > 0)) {
        throw ParameterError("RandomTrajSpec: arena extents must be positive");
      }
      if (!(speed_spread >= 0 && speed_spread < 1)) throw ParameterError("RandomTrajSpec: speed_spread must lie in [0, 1)");
    }
  }
};

namespace detail {

// Cubic Hermite through time-stamped knots with Catmull-Rom tangents.
class CatmullRom {
 public:
  CatmullRom(std::vector<Vec3> pts, std::vector<double> times)
      : p_(std::move(pts)), t_(std::move(times)), m_(p_.size()) {
    const std::size_t n = p_.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (i == 0 || i + 1 == n) {
        m_[i] = Vec3::Zero();
      } else {
        m_[i] = (p_[i + 1] - p_[i - 1]) / (t_[i + 1] - t_[i - 1]);
      }
    }
  }

  double end_time() const { return t_.back(); }

  Vec3 operator()(double t) const {
    t = std::clamp(t, t_.front(), t_.back());
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t i = it == t_.begin() ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
    if (i + 1 >= p_.size()) i = p_.size() - 2;
    const double h = t_[i + 1] - t_[i];
    const double s = (t - t_[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * p_[i] + (s3 - 2 * s2 + s) * h * m_[i] +
           (-2 * s3 + 3 * s2) * p_[i + 1] + (s3 - s2) * h * m_[i + 1];
  }

 private:
  std::vector<Vec3> p_;
  std::vector<double> t_;
  std::vector<Vec3> m_;
};

inline std::size_t sample_count(double duration, double dt) {
  return static_cast<std::size_t>(std::llround(duration / dt)) + 1;
}

}  // namespace detail

// Random waypoint spline, time-scaled to the requested mean speed and
// rejection-sampled until the speed and acceleration caps hold.
inline Trajectory gen_random(std::uint64_t seed, const RandomTrajSpec& spec) {
  spec.validate();
  Trajectory tr;
  tr.dt = spec.dt;
  const std::size_t n = detail::sample_count(spec.duration, spec.dt);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto draw_point = [&]() {
    return Vec3((u01(rng) - 0.5) * spec.arena.x(), (u01(rng) - 0.5) * spec.arena.y(),
                spec.base_altitude + (u01(rng) - 0.5) * spec.arena.z());
  };

  if (spec.mean_speed == 0.0) {
    tr.positions.assign(n, draw_point());
    return tr;
  }

  std::string last_reason;
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<Vec3> pts{draw_point()};
    std::vector<double> times{0.0};
    // generous time budget; the final rescale may stretch it
    const double horizon = 2.5 * spec.duration;
    while (times.back() < horizon) {
      Vec3 next = draw_point();
      for (int k = 0; k < 20 && (next - pts.back()).norm() < spec.min_waypoint_spacing; ++k) {
        next = draw_point();
      }
      const double speed =
          spec.mean_speed * (1.0 + spec.speed_spread * (2.0 * u01(rng) - 1.0));
      times.push_back(times.back() + (next - pts.back()).norm() / speed);
      pts.push_back(next);
    }
    const detail::CatmullRom spline(pts, times);

    auto sample = [&](double scale) {
      Trajectory t;
      t.dt = spec.dt;
      t.positions.resize(n);
      for (std::size_t i = 0; i < n; ++i) t.positions[i] = spline(scale * spec.dt * static_cast<double>(i));
      return t;
    };
    Trajectory raw = sample(1.0);
    const TrajStats raw_stats = stats(raw);
    if (!(raw_stats.mean_speed > 0)) continue;
    const double scale = spec.mean_speed / raw_stats.mean_speed;
    if (scale * spec.duration > spline.end_time()) continue;
    tr = sample(scale);
    const TrajStats st = stats(tr);
    std::ostringstream why;
    if (std::abs(st.mean_speed - spec.mean_speed) > 0.15 * spec.mean_speed) {
      why << "mean speed " << st.mean_speed;
    } else if (st.max_speed > spec.max_speed) {
      why << "max speed " << st.max_speed << " > " << spec.max_speed;
    } else if (st.max_accel > spec.max_accel) {
      why << "max accel " << st.max_accel << " > " << spec.max_accel;
    } else {
      return tr;
    }
    last_reason = why.str();
  }
  throw GenerationError("gen_random: 100 rejections (last: " + last_reason + ")");
}

// Gerono figure-eight spanning a length (x) by width (y) box, traversed at
// constant speed via arc-length reparameterization.
inline Trajectory gen_lemniscate(double width, double length, double speed, double duration,
                                 double dt, double altitude = 10.0) {
  if (!(width > 0 && length > 0 && speed > 0 && duration > 0 && dt > 0)) {
    throw ParameterError("gen_lemniscate: arguments must be positive");
  }
  auto curve = [&](double u) {
    return Vec3(0.5 * length * std::sin(u), 0.5 * width * std::sin(2.0 * u), altitude);
  };
  constexpr std::size_t kGrid = 200000;
  std::vector<double> us(kGrid + 1), arc(kGrid + 1);
  arc[0] = 0.0;
  Vec3 prev = curve(0.0);
  for (std::size_t i = 0; i <= kGrid; ++i) {
    us[i] = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(kGrid);
    if (i > 0) {
      const Vec3 cur = curve(us[i]);
      arc[i] = arc[i - 1] + (cur - prev).norm();
      prev = cur;
    }
  }
  const double perimeter = arc.back();

  Trajectory tr;
  tr.dt = dt;
  const std::size_t n = detail::sample_count(duration, dt);
  tr.positions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::fmod(speed * dt * static_cast<double>(i), perimeter);
    auto it = std::upper_bound(arc.begin(), arc.end(), s);
    std::size_t k = it == arc.begin() ? 0 : static_cast<std::size_t>(it - arc.begin()) - 1;
    if (k >= kGrid) k = kGrid - 1;
    const double f = (s - arc[k]) / (arc[k + 1] - arc[k]);
    tr.positions[i] = curve(us[k] + f * (us[k + 1] - us[k]));
  }
  return tr;
}

inline void save_trajectory(const Trajectory& tr, std::ostream& os) {
  os << "t,x,y,z\n";
  os << std::setprecision(12);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const Vec3& p = tr.positions[i];
    os << tr.time(i) << ',' << p.x() << ',' << p.y() << ',' << p.z() << '\n';
  }
}

inline void save_trajectory(const Trajectory& tr, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write trajectory file '" + path + "'");
  save_trajectory(tr, os);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& field, double& out) {
  const std::string f = trim(field);
  if (f.empty()) return false;
  char* end = nullptr;
  out = std::strtod(f.c_str(), &end);
  return end == f.c_str() + f.size() && std::isfinite(out);
}

}  // namespace detail

inline Trajectory load_trajectory(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<double> times;
  Trajectory tr;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (!header_seen) {
      std::string compact;
      for (char c : t) {
        if (c != ' ' && c != '\t') compact.push_back(c);
      }
      if (compact != "t,x,y,z") throw ParseError("expected header 't,x,y,z'", line_no);
      header_seen = true;
      continue;
    }
    std::stringstream ss(t);
    std::string field;
    double v[4];
    int k = 0;
    while (std::getline(ss, field, ',')) {
      if (k >= 4 || !detail::parse_double(field, v[k])) {
        throw ParseError("malformed row '" + t + "'", line_no);
      }
      ++k;
    }
    if (k != 4) throw ParseError("malformed row '" + t + "' (expected 4 fields)", line_no);
    times.push_back(v[0]);
    tr.positions.emplace_back(v[1], v[2], v[3]);
    if (times.size() == 2) {
      tr.dt = times[1] - times[0];
      if (!(tr.dt > 0)) throw ParseError("non-increasing time", line_no);
    } else if (times.size() > 2) {
      const double expected = times[0] + tr.dt * static_cast<double>(times.size() - 1);
      if (std::abs(v[0] - expected) > 1e-6) {
        throw ParseError("non-uniform time step at row t=" + detail::trim(t.substr(0, t.find(','))), line_no);
      }
    }
  }
  if (!header_seen) throw ParseError("empty file", line_no);
  if (times.empty()) throw ParseError("no samples", line_no);
  if (times.size() < 3) throw ParseError("fewer than 3 samples", line_no);
  tr.t0 = times[0];
  return tr;
}

inline Trajectory load_trajectory(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open trajectory file '" + path + "'");
  return load_trajectory(is);
}

}  // namespace interceptlab
