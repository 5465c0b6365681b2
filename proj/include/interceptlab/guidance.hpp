#pragma once

// Reactive interception guidance laws: pure pursuit, canonical PN, linear
// (Cartesian) PN, generalized PN and the fast-engagement EPN blend.

#include <cmath>
#include <string>

#include "interceptlab/numcore.hpp"

namespace interceptlab {

// Interceptor and target coincide; callers treat this as the interception
// moment.
struct CoincidentError : Error {
  using Error::Error;
};

struct LosState {
  Vec3 dp = Vec3::Zero();  // target - interceptor (m)
  Vec3 dv = Vec3::Zero();  // target - interceptor (m/s)
  double r = 0.0;
  double r_dot = 0.0;
  double v_c = 0.0;        // closing velocity, -r_dot
  Vec3 omega = Vec3::Zero();  // LOS angular rate (rad/s)
  double lambda_dot = 0.0;
  double t_go = 0.0;
};

inline LosState los_state(const Vec3& p_int, const Vec3& v_int, const Vec3& p_tgt,
                          const Vec3& v_tgt, double eps_v = 1e-3) {
  LosState s;
  s.dp = p_tgt - p_int;
  s.dv = v_tgt - v_int;
  s.r = s.dp.norm();
  if (!(s.r > 0.0)) throw CoincidentError("los_state: interceptor and target coincide");
  s.r_dot = s.dp.dot(s.dv) / s.r;
  s.v_c = -s.r_dot;
  s.omega = s.dp.cross(s.dv) / (s.r * s.r);
  s.lambda_dot = s.omega.norm();
  s.t_go = s.r / std::max(s.dv.norm(), eps_v);
  return s;
}

enum class GuidanceLaw { PP, PN, LPN, GPN, EPN };

inline std::string to_string(GuidanceLaw law) {
  switch (law) {
    case GuidanceLaw::PP: return "pp";
    case GuidanceLaw::PN: return "pn";
    case GuidanceLaw::LPN: return "lpn";
    case GuidanceLaw::GPN: return "gpn";
    case GuidanceLaw::EPN: return "epn";
  }
  return "?";
}

struct GuidanceParams {
  GuidanceLaw law = GuidanceLaw::EPN;
  double G = 19.7;
  double W = 5.1e-2;
  double k1 = 69.5;
  double k2 = 5.8;
  double v_r = -6.6;
  double eps_v = 1e-3;

  void validate() const {
    if (!(G >= 0)) throw ParameterError("GuidanceParams: G must be nonnegative");
    if (!(W >= 0 && W <= 1)) throw ParameterError("GuidanceParams: W must lie in [0, 1]");
    if (!(eps_v > 0)) throw ParameterError("GuidanceParams: eps_v must be positive");
  }
};

// Preset gains for the compared laws.
inline GuidanceParams pp_preset() { return {GuidanceLaw::PP, 0.83, 0.0, 0, 0, 0, 1e-3}; }
inline GuidanceParams lpn_preset() { return {GuidanceLaw::LPN, 19.7, 0.0, 0, 0, 0, 1e-3}; }
inline GuidanceParams epn_preset() { return {GuidanceLaw::EPN, 19.7, 5.1e-2, 0, 0, 0, 1e-3}; }
inline GuidanceParams gpn1_preset() { return {GuidanceLaw::GPN, 0.0, 0.0, 40.0, 1.0, -5.0, 1e-3}; }
inline GuidanceParams gpn2_preset() { return {GuidanceLaw::GPN, 0.0, 0.0, 69.5, 5.8, -6.6, 1e-3}; }
inline GuidanceParams pn_preset() { return {GuidanceLaw::PN, 3.0, 0.0, 0, 0, 0, 1e-3}; }

struct GuidanceCommand {
  Vec3 a_cmd = Vec3::Zero();
  Vec3 a_limited = Vec3::Zero();
  double desired_heading = 0.0;
};

inline double heading_toward(const Vec3& dp) {
  return (dp.x() == 0.0 && dp.y() == 0.0) ? 0.0 : std::atan2(dp.y(), dp.x());
}

inline GuidanceCommand make_command(const Vec3& a, const Vec3& dp) {
  return {a, a, heading_toward(dp)};
}

inline GuidanceCommand pp(const LosState& los, const GuidanceParams& params) {
  return make_command(params.G * los.dp, los.dp);
}

// Unit vector perpendicular to the LOS in the engagement plane.
inline Vec3 pn_direction(const LosState& los) {
  if (los.lambda_dot < 1e-9 || !(los.r > 0.0)) return Vec3::Zero();
  const Vec3 n = los.omega.cross(los.dp / los.r);
  const double norm = n.norm();
  return norm > 0.0 ? Vec3(n / norm) : Vec3::Zero();
}

inline GuidanceCommand pn(const LosState& los, const GuidanceParams& params, const Vec3& a_dir) {
  if (std::abs(a_dir.norm() - 1.0) > 1e-9) {
    throw ContractViolation("pn: a_dir must be a unit vector");
  }
  if (los.lambda_dot < 1e-9) return make_command(Vec3::Zero(), los.dp);
  return make_command(params.G * los.v_c * los.lambda_dot * a_dir, los.dp);
}

inline GuidanceCommand pn(const LosState& los, const GuidanceParams& params) {
  const Vec3 dir = pn_direction(los);
  if (dir.isZero()) return make_command(Vec3::Zero(), los.dp);
  return pn(los, params, dir);
}

// Zero-effort-miss over t_go^2.
inline Vec3 lpn_term(const LosState& los) {
  return (los.dp + los.dv * los.t_go) / (los.t_go * los.t_go);
}

inline GuidanceCommand lpn(const LosState& los, const GuidanceParams& params) {
  return make_command(params.G * lpn_term(los), los.dp);
}

inline GuidanceCommand epn(const LosState& los, const GuidanceParams& params) {
  const Vec3 a = params.G * ((1.0 - params.W) * lpn_term(los) + params.W * los.dp);
  return make_command(a, los.dp);
}

// a = k1 |v_c| lambda_dot n + k2 (r_dot - v_r) L, with L the unit LOS and n the
// PN direction. The second term regulates the range rate toward v_r < 0.
// |v_c| keeps the lateral term from flipping sign once the target is behind.
inline GuidanceCommand gpn(const LosState& los, const GuidanceParams& params) {
  const Vec3 L = los.dp / los.r;
  Vec3 a = params.k2 * (los.r_dot - params.v_r) * L;
  const Vec3 n = pn_direction(los);
  if (!n.isZero()) a += params.k1 * std::abs(los.v_c) * los.lambda_dot * n;
  return make_command(a, los.dp);
}

inline GuidanceCommand guidance_command(const LosState& los, const GuidanceParams& params) {
  switch (params.law) {
    case GuidanceLaw::PP: return pp(los, params);
    case GuidanceLaw::PN: return pn(los, params);
    case GuidanceLaw::LPN: return lpn(los, params);
    case GuidanceLaw::GPN: return gpn(los, params);
    case GuidanceLaw::EPN: return epn(los, params);
  }
  return {};
}

struct MotionLimits {
  Vec3 v_max = Vec3(8, 8, 4);
  Vec3 a_max = Vec3(4, 4, 2);
};

// Per-axis box clamp of the acceleration, then zero any axis that would
// push a saturated velocity further out.
inline GuidanceCommand clamp_command(const Vec3& a_cmd, const Vec3& v_int,
                                     const MotionLimits& limits, double desired_heading = 0.0) {
  if (!((limits.v_max.array() > 0).all() && (limits.a_max.array() > 0).all())) {
    throw ParameterError("clamp_command: limits must be positive");
  }
  GuidanceCommand out;
  out.a_cmd = a_cmd;
  out.desired_heading = desired_heading;
  out.a_limited = clamp_box(a_cmd, limits.a_max);
  for (int i = 0; i < 3; ++i) {
    if ((v_int[i] >= limits.v_max[i] && out.a_limited[i] > 0.0) ||
        (v_int[i] <= -limits.v_max[i] && out.a_limited[i] < 0.0)) {
      out.a_limited[i] = 0.0;
    }
  }
  return out;
}

inline GuidanceCommand clamp_command(const GuidanceCommand& cmd, const Vec3& v_int,
                                     const MotionLimits& limits) {
  return clamp_command(cmd.a_cmd, v_int, limits, cmd.desired_heading);
}

}  // namespace interceptlab
