#pragma once

// LiDAR measurement uncertainty model and a simulated detector that emits
// noisy target positions together with the covariance they were drawn from.

#include <cmath>
#include <optional>
#include <random>

#include "interceptlab/numcore.hpp"

namespace interceptlab {

using Rng = std::mt19937_64;

struct ObserverState {
  Vec3 t = Vec3::Zero();  // position in the world frame (m)
  Rotation3 R_m;          // measured orientation, body -> world
  Vec3 omega = Vec3::Zero();  // body angular rates (rad/s)
  Mat3 sigma_t = Mat3::Zero();  // translation covariance (m^2)
  double heading = 0.0;
};

struct SensorNoiseParams {
  double sigma_l = 0.03;      // range stdev (m)
  double sigma_zeta3 = 0.1;   // sampling-bias stdev (m)
  double c_alpha = 0.005;     // rad*s
  double sigma_t = 0.02;      // observer self-localization stdev per axis (m)
  double rate = 10.0;         // Hz
  double max_range = 25.0;    // m
  bool fov_gating = false;
  double fov_azimuth_halfwidth = M_PI / 4.0;  // rad, used when fov_gating
  double dropout_p = 0.0;

  void validate() const {
    if (!(sigma_l >= 0 && sigma_zeta3 >= 0 && c_alpha >= 0 && sigma_t >= 0 &&
          max_range >= 0 && fov_azimuth_halfwidth >= 0)) {
      throw ParameterError("SensorNoiseParams: noise parameters must be nonnegative");
    }
    if (!(rate > 0)) throw ParameterError("SensorNoiseParams: rate must be positive");
    if (!(dropout_p >= 0 && dropout_p <= 1)) {
      throw ParameterError("SensorNoiseParams: dropout_p must lie in [0, 1]");
    }
  }
};

struct Detection {
  double time = 0.0;
  Vec3 z = Vec3::Zero();
  Mat3 Z = Mat3::Zero();
  // Geometry the covariance was computed from; lets a replay recompute Z
  // under different noise parameters.
  ObserverState observer;
  Vec3 ray_body = Vec3::UnitX();
  double range = 0.0;
};

// Sigma_alpha = c_alpha^2 diag(omega^2), element-wise square.
inline Mat3 orientation_cov(const Vec3& omega, double c_alpha) {
  return (c_alpha * c_alpha * omega.cwiseAbs2()).asDiagonal();
}

// Sigma = J blockdiag(sigma_l^2, Sigma_t, Sigma_alpha) J^T + sigma_zeta3^2 I
// with J = [R d | I | l R dRx d | l R dRy d | l R dRz d].
inline Mat3 measurement_cov(const ObserverState& obs, const Vec3& d, double l_m,
                            double sigma_l, double sigma_zeta3, const Mat3& sigma_alpha) {
  if (std::abs(d.norm() - 1.0) > 1e-9) {
    throw ContractViolation("measurement_cov: ray direction must be a unit vector");
  }
  if (!(l_m > 0.0)) throw ContractViolation("measurement_cov: range must be positive");
  static const AxisRotationDerivatives dR = rot_axis_derivatives();
  const Mat3& R = obs.R_m.matrix();

  Eigen::Matrix<double, 3, 7> J;
  J.col(0) = R * d;
  J.block<3, 3>(0, 1).setIdentity();
  J.col(4) = l_m * R * dR.d_alpha * d;
  J.col(5) = l_m * R * dR.d_beta * d;
  J.col(6) = l_m * R * dR.d_gamma * d;

  Eigen::Matrix<double, 7, 7> noise = Eigen::Matrix<double, 7, 7>::Zero();
  noise(0, 0) = sigma_l * sigma_l;
  noise.block<3, 3>(1, 1) = obs.sigma_t;
  noise.block<3, 3>(4, 4) = sigma_alpha;

  Mat3 sigma = J * noise * J.transpose();
  sigma.diagonal().array() += sigma_zeta3 * sigma_zeta3;
  return symmetrized(sigma);
}

inline Mat3 measurement_cov(const ObserverState& obs, const Vec3& d, double l_m,
                            const SensorNoiseParams& params) {
  return measurement_cov(obs, d, l_m, params.sigma_l, params.sigma_zeta3,
                         orientation_cov(obs.omega, params.c_alpha));
}

// Body-frame ray and range from true geometry.
struct RayGeometry {
  Vec3 ray_body;
  double range;
};

inline std::optional<RayGeometry> ray_to(const ObserverState& obs, const Vec3& target) {
  const Vec3 rel = target - obs.t;
  const double range = rel.norm();
  if (!(range > 0.0)) return std::nullopt;
  return RayGeometry{obs.R_m.matrix().transpose() * rel / range, range};
}

inline Vec3 sample_gaussian(const Mat3& cov, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec3 e;
  for (int i = 0; i < 3; ++i) e[i] = n01(rng);
  const Mat3 L = cholesky_psd(cov, 0.0);
  return L * e;
}

inline std::optional<Detection> detect(double time, const Vec3& target_p,
                                       const ObserverState& obs,
                                       const SensorNoiseParams& params, Rng& rng) {
  const auto geom = ray_to(obs, target_p);
  if (!geom || geom->range > params.max_range) return std::nullopt;
  if (params.fov_gating) {
    const Vec3 rel = target_p - obs.t;
    const double azimuth = std::atan2(rel.y(), rel.x());
    if (std::abs(wrap_angle(azimuth - obs.heading)) > params.fov_azimuth_halfwidth) {
      return std::nullopt;
    }
  }
  if (params.dropout_p > 0.0) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (u01(rng) < params.dropout_p) return std::nullopt;
  }
  Detection det;
  det.time = time;
  det.Z = measurement_cov(obs, geom->ray_body, geom->range, params);
  det.z = target_p + sample_gaussian(det.Z, rng);
  det.observer = obs;
  det.ray_body = geom->ray_body;
  det.range = geom->range;
  return det;
}

}  // namespace interceptlab
