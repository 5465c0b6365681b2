#pragma once

// Closed-loop interception scenarios: point-mass interceptor with
// acceleration lag and linear drag, trajectory playback for the target,
// detection -> estimation -> guidance loop, detection-loss recovery and
// net-pass (interception) detection.

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "interceptlab/guidance.hpp"
#include "interceptlab/mpc.hpp"
#include "interceptlab/sensing.hpp"
#include "interceptlab/tracker.hpp"
#include "interceptlab/trajectory.hpp"

namespace interceptlab {

inline constexpr double kGravity = 9.81;

struct InterceptorParams {
  MotionLimits limits;
  double heading_rate_max = 2.0;  // rad/s
  double accel_lag = 0.25;        // tau (s); 0 = instantaneous
  double linear_drag = 0.1;       // kappa (1/s)
  double sim_dt = 0.005;
  double control_rate = 20.0;     // Hz
  double lost_timeout = 2.0;      // s without detection before re-acquisition mode

  void validate() const {
    if (!(accel_lag >= 0 && linear_drag >= 0)) {
      throw ParameterError("InterceptorParams: lag and drag must be nonnegative");
    }
    if (!(sim_dt > 0 && control_rate > 0 && heading_rate_max >= 0 && lost_timeout > 0)) {
      throw ParameterError("InterceptorParams: rates and steps must be positive");
    }
  }
};

struct InterceptorState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  double heading = 0.0;
  double time = 0.0;
};

inline InterceptorState step_interceptor(const InterceptorState& s, const GuidanceCommand& cmd,
                                         const InterceptorParams& params, double dt) {
  if (!(dt > 0)) throw ParameterError("step_interceptor: dt must be positive");
  InterceptorState n = s;
  if (params.accel_lag > 0.0) {
    const double g = std::min(1.0, dt / params.accel_lag);
    n.a = s.a + g * (cmd.a_limited - s.a);
  } else {
    n.a = cmd.a_limited;
  }
  n.v = clamp_box(s.v + (n.a - params.linear_drag * s.v) * dt, params.limits.v_max);
  n.p = s.p + n.v * dt;
  const double max_turn = params.heading_rate_max * dt;
  const double turn = std::clamp(wrap_angle(cmd.desired_heading - s.heading), -max_turn, max_turn);
  n.heading = wrap_angle(s.heading + turn);
  n.time = s.time + dt;
  return n;
}

enum class NetPlane {
  Horizontal,      // disc in the horizontal plane offset_below under the interceptor
  RelativeMotion   // disc through the net center, normal to the relative motion
};

inline std::string to_string(NetPlane p) {
  return p == NetPlane::Horizontal ? "horizontal" : "relative_motion";
}

inline NetPlane net_plane_from_string(const std::string& s) {
  if (s == "horizontal") return NetPlane::Horizontal;
  if (s == "relative_motion") return NetPlane::RelativeMotion;
  throw ParameterError("unknown net plane '" + s + "'");
}

struct NetGeometry {
  double radius = 2.0;
  double offset_below = 1.5;
  double rearm_time = 1.0;
  NetPlane plane = NetPlane::RelativeMotion;

  Vec3 center(const Vec3& interceptor_p) const {
    return interceptor_p - Vec3(0, 0, offset_below);
  }
};

struct InterceptionEvent {
  double time = 0.0;
  double accuracy = 0.0;
  Vec3 crossing_point = Vec3::Zero();
};

inline bool rearmed(std::optional<double> last_event_time, double now, double rearm) {
  return !last_event_time || now - *last_event_time >= rearm;
}

// rel = target - interceptor; the net disc lies in the plane z = -offset_below.
inline std::optional<InterceptionEvent> check_interception(const Vec3& prev_rel, const Vec3& cur_rel,
                                                           const NetGeometry& net,
                                                           std::optional<double> last_event_time,
                                                           double now) {
  const double d0 = prev_rel.z() + net.offset_below;
  const double d1 = cur_rel.z() + net.offset_below;
  const bool crosses = (d0 < 0.0 && d1 >= 0.0) || (d0 > 0.0 && d1 <= 0.0);
  if (!crosses) return std::nullopt;
  const double s = d0 / (d0 - d1);
  Vec3 point = prev_rel + s * (cur_rel - prev_rel);
  point.z() = -net.offset_below;
  const double accuracy = point.head<2>().norm();
  if (accuracy > net.radius || !rearmed(last_event_time, now, net.rearm_time)) return std::nullopt;
  return InterceptionEvent{now, accuracy, point};
}

// rel = target - net center. The pass is registered in the step where the
// closest approach to the center occurs, on the disc normal to the step's
// relative displacement.
inline std::optional<InterceptionEvent> check_interception_swept(
    const Vec3& prev_rel, const Vec3& cur_rel, const NetGeometry& net,
    std::optional<double> last_event_time, double now) {
  const Vec3 d = cur_rel - prev_rel;
  const double dd = d.squaredNorm();
  if (!(dd > 0.0)) return std::nullopt;
  const double s = -prev_rel.dot(d) / dd;
  if (!(s > 0.0 && s <= 1.0)) return std::nullopt;
  const Vec3 point = prev_rel + s * d;
  const double accuracy = point.norm();
  if (accuracy > net.radius || !rearmed(last_event_time, now, net.rearm_time)) return std::nullopt;
  return InterceptionEvent{now, accuracy, point};
}

struct EstErrorSample {
  double time = 0.0;
  Vec3 p_err = Vec3::Zero();
  Vec3 v_err = Vec3::Zero();
};

// Guidance method: a reactive law or the MPC planner.
struct Method {
  std::string name = "epn";
  bool use_mpc = false;
  GuidanceParams guidance = epn_preset();
};

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"pp", "pn", "lpn", "gpn", "epn", "mpc"};
  return names;
}

// Named method with its preset gains; `gpn` is the tuned set (gpn2),
// `gpn1` the original one.
inline Method method_from_name(const std::string& name) {
  if (name == "pp") return {name, false, pp_preset()};
  if (name == "pn") return {name, false, pn_preset()};
  if (name == "lpn") return {name, false, lpn_preset()};
  if (name == "epn") return {name, false, epn_preset()};
  if (name == "gpn" || name == "gpn2") return {name, false, gpn2_preset()};
  if (name == "gpn1") return {name, false, gpn1_preset()};
  if (name == "mpc") return {name, true, {}};
  throw ParameterError("unknown method '" + name + "' (expected one of pp, pn, lpn, gpn, epn, mpc)");
}

struct Scenario {
  std::shared_ptr<const Trajectory> trajectory;
  std::string trajectory_name;
  InterceptorState start;
  Method method;
  MpcParams mpc;
  SensorNoiseParams sensor;
  FilterParams filter;
  InterceptorParams interceptor;
  NetGeometry net;
  bool truth_feed = true;
  std::uint64_t seed = 1;
  double duration = 100.0;
  bool record_timing = false;
  bool check_invariants = false;
};

struct RunReport {
  std::string method;
  std::string trajectory;
  std::uint64_t seed = 0;
  bool truth_feed = true;
  double duration = 0.0;
  Vec3 start = Vec3::Zero();
  NetGeometry net;
  std::vector<InterceptionEvent> events;
  std::vector<EstErrorSample> est_samples;
  std::vector<double> compute_times;  // seconds per guidance cycle; empty unless timing
  int scans = 0;
  int detections = 0;
  int mpc_nonconverged = 0;
  int invariant_violations = 0;
  int state_limit_violations = 0;
  double lost_time = 0.0;  // seconds spent in re-acquisition mode

  double recall() const { return scans > 0 ? static_cast<double>(detections) / scans : 0.0; }
};

// Observer pose as seen by the detector: heading plus small-angle tilt from
// the horizontal acceleration, body rates from tilt and heading changes.
inline ObserverState observer_from(const InterceptorState& s, const InterceptorState& prev,
                                   double dt, double sigma_t) {
  auto tilt = [](const InterceptorState& st) {
    const Vec3 a_body = rot_z(-st.heading) * st.a;
    return Vec3(-a_body.y() / kGravity, a_body.x() / kGravity, 0.0);  // roll, pitch
  };
  const Vec3 t_now = tilt(s), t_prev = tilt(prev);
  ObserverState obs;
  obs.t = s.p;
  obs.heading = s.heading;
  obs.R_m = Rotation3::from_ypr(s.heading, t_now.y(), t_now.x());
  obs.omega = Vec3((t_now.x() - t_prev.x()) / dt, (t_now.y() - t_prev.y()) / dt,
                   wrap_angle(s.heading - prev.heading) / dt);
  obs.sigma_t = sigma_t * sigma_t * Mat3::Identity();
  return obs;
}

inline RunReport run_scenario(const Scenario& sc) {
  if (!sc.trajectory) throw ScenarioError("run_scenario: no trajectory");
  const Trajectory& tr = *sc.trajectory;
  tr.validate();
  if (!(sc.duration > 0)) throw ScenarioError("run_scenario: duration must be positive");
  if (tr.t0 > 1e-9 || tr.end_time() + 1e-9 < sc.duration) {
    throw ScenarioError("run_scenario: trajectory '" + sc.trajectory_name + "' covers [" +
                        std::to_string(tr.t0) + ", " + std::to_string(tr.end_time()) +
                        "] s, shorter than the scenario duration");
  }
  const InterceptorParams& ip = sc.interceptor;
  ip.validate();
  sc.sensor.validate();
  sc.method.guidance.validate();

  RunReport rep;
  rep.method = sc.method.name;
  rep.trajectory = sc.trajectory_name;
  rep.seed = sc.seed;
  rep.truth_feed = sc.truth_feed;
  rep.duration = sc.duration;
  rep.start = sc.start.p;
  rep.net = sc.net;

  Rng rng(sc.seed);
  TargetTracker tracker(sc.filter);
  std::unique_ptr<MpcPlanner> planner;
  if (sc.method.use_mpc) {
    MpcParams mp = sc.mpc;
    mp.v_max = ip.limits.v_max;
    mp.a_max = ip.limits.a_max;
    planner = std::make_unique<MpcPlanner>(mp);
  }

  const double dt = ip.sim_dt;
  const long steps = std::lround(sc.duration / dt);
  const long control_every = std::max(1L, std::lround(1.0 / (ip.control_rate * dt)));
  const long sensor_every = std::max(1L, std::lround(1.0 / (sc.sensor.rate * dt)));

  InterceptorState state = sc.start;
  state.time = 0.0;
  InterceptorState prev_state = state;
  GuidanceCommand cmd;
  cmd.desired_heading = state.heading;
  std::optional<double> last_detection;
  std::optional<double> last_event;
  std::optional<Vec3> hold_point;
  const double eps = 1e-9;

  auto rel_of = [&](const Vec3& target_p, const InterceptorState& s) -> Vec3 {
    return sc.net.plane == NetPlane::Horizontal ? Vec3(target_p - s.p)
                                                : Vec3(target_p - sc.net.center(s.p));
  };
  Vec3 prev_rel = rel_of(tr.at(0.0).p, state);

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Trajectory::Sample truth = tr.at(t);

    if (!sc.truth_feed && k % sensor_every == 0) {
      const ObserverState obs = observer_from(state, prev_state, dt, sc.sensor.sigma_t);
      ++rep.scans;
      if (auto det = detect(t, truth.p, obs, sc.sensor, rng)) {
        tracker.update(*det);
        ++rep.detections;
        last_detection = t;
      } else {
        tracker.predict_to(t);
      }
      if (sc.check_invariants && tracker.initialized()) {
        const ImmBelief& b = tracker.imm_belief();
        const bool ok = sc.filter.kind == FilterKind::IMM
                            ? (mu_on_simplex(b) && covariances_psd(b))
                            : is_psd(tracker.estimate().cov);
        if (!ok) ++rep.invariant_violations;
      }
    }

    if (k % control_every == 0) {
      std::optional<TargetStateCA> target;
      if (sc.truth_feed) {
        target = TargetStateCA{truth.p, truth.v, truth.a};
      } else if (tracker.initialized()) {
        target = tracker.extrapolate(t);
        rep.est_samples.push_back({t, target->p - truth.p, target->v - truth.v});
      }
      const bool lost =
          !sc.truth_feed && sc.sensor.fov_gating &&
          (!last_detection || t - *last_detection > ip.lost_timeout);

      if (lost || !target) {
        // hold position; rotate in place when the sensor has a limited FOV
        if (!hold_point) hold_point = state.p;
        const Vec3 a = 2.0 * (*hold_point - state.p) - 2.0 * state.v;
        const double heading = lost ? state.heading + 0.5 * M_PI : state.heading;
        cmd = clamp_command(a, state.v, ip.limits, heading);
        if (lost) rep.lost_time += static_cast<double>(control_every) * dt;
      } else {
        hold_point.reset();
        const Vec3 aim = sc.net.center(state.p);
        const auto t_start = std::chrono::steady_clock::now();
        try {
          GuidanceCommand raw;
          if (planner) {
            MpcSolution sol;
            raw = planner->command({aim, state.v}, *target, &sol);
            if (!sol.converged) {
              ++rep.mpc_nonconverged;
              raw = cmd;  // previous command
            }
          } else {
            const LosState los = los_state(aim, state.v, target->p, target->v,
                                           sc.method.guidance.eps_v);
            raw = guidance_command(los, sc.method.guidance);
          }
          cmd = clamp_command(raw, state.v, ip.limits);
        } catch (const CoincidentError&) {
          cmd = clamp_command(cmd.a_cmd, state.v, ip.limits, cmd.desired_heading);
        }
        if (sc.record_timing) {
          const auto t_end = std::chrono::steady_clock::now();
          rep.compute_times.push_back(std::chrono::duration<double>(t_end - t_start).count());
        }
      }
    } else {
      cmd = clamp_command(cmd.a_cmd, state.v, ip.limits, cmd.desired_heading);
    }

    prev_state = state;
    state = step_interceptor(state, cmd, ip, dt);
    if (((state.v.cwiseAbs() - ip.limits.v_max).array() > eps).any() ||
        ((state.a.cwiseAbs() - ip.limits.a_max).array() > eps).any()) {
      ++rep.state_limit_violations;
    }

    const double t_next = static_cast<double>(k + 1) * dt;
    const Vec3 rel = rel_of(tr.at(t_next).p, state);
    const auto ev = sc.net.plane == NetPlane::Horizontal
                        ? check_interception(prev_rel, rel, sc.net, last_event, t_next)
                        : check_interception_swept(prev_rel, rel, sc.net, last_event, t_next);
    if (ev) {
      rep.events.push_back(*ev);
      last_event = ev->time;
    }
    prev_rel = rel;
  }
  return rep;
}

// Random interceptor start near the target's initial position, at rest:
// horizontal distance in [min_dist, max_dist], altitude within +-2 m.
inline InterceptorState random_start(const Trajectory& tr, std::uint64_t seed, double min_dist = 10.0,
                                     double max_dist = 30.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double r = min_dist + (max_dist - min_dist) * u01(rng);
  const double az = 2.0 * M_PI * u01(rng);
  const double dz = 4.0 * u01(rng) - 2.0;
  InterceptorState s;
  const Vec3 p0 = tr.positions.front();
  s.p = p0 + Vec3(r * std::cos(az), r * std::sin(az), dz);
  s.heading = heading_toward(p0 - s.p);
  return s;
}

}  // namespace interceptlab
