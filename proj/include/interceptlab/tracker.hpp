#pragma once

// Stateful target tracker: a CV or CA Kalman filter, or the CV/CA IMM,
// driven by time-stamped detections.

#include <optional>
#include <string>

#include "interceptlab/estimation.hpp"
#include "interceptlab/sensing.hpp"

namespace interceptlab {

enum class FilterKind { CV, CA, IMM };

// Where the measurement covariance fed to the filter comes from.
enum class CovarianceMode {
  Reported,         // the covariance attached to the detection
  MotionDependent,  // recomputed with the filter's own noise parameters
  Static            // recomputed with a constant orientation covariance
};

inline std::string to_string(FilterKind k) {
  switch (k) {
    case FilterKind::CV: return "cv";
    case FilterKind::CA: return "ca";
    case FilterKind::IMM: return "imm";
  }
  return "?";
}

inline FilterKind filter_kind_from_string(const std::string& s) {
  if (s == "cv") return FilterKind::CV;
  if (s == "ca") return FilterKind::CA;
  if (s == "imm") return FilterKind::IMM;
  throw ParameterError("unknown filter kind '" + s + "' (expected cv, ca or imm)");
}

inline std::string to_string(CovarianceMode m) {
  switch (m) {
    case CovarianceMode::Reported: return "reported";
    case CovarianceMode::MotionDependent: return "motion";
    case CovarianceMode::Static: return "static";
  }
  return "?";
}

inline CovarianceMode covariance_mode_from_string(const std::string& s) {
  if (s == "reported") return CovarianceMode::Reported;
  if (s == "motion") return CovarianceMode::MotionDependent;
  if (s == "static") return CovarianceMode::Static;
  throw ParameterError("unknown covariance mode '" + s + "'");
}

struct FilterParams {
  FilterKind kind = FilterKind::IMM;
  double sigma_a = 2.0;
  double sigma_j = 2.0;
  double sigma_pin = 1e-2;
  double p_cv_to_ca = 0.05;
  double p_ca_to_cv = 0.05;
  ImmInitCov init;
  CovarianceMode cov_mode = CovarianceMode::Reported;
  // measurement-model parameters used by the MotionDependent/Static modes
  double sigma_l = 0.03;
  double sigma_zeta3 = 0.1;
  double c_alpha = 0.005;
  double sigma_alpha_static = 0.0;

  ImmParams imm() const { return {sigma_a, sigma_j, sigma_pin}; }
};

class TargetTracker {
 public:
  explicit TargetTracker(FilterParams params = {}) : params_(params) {}

  const FilterParams& params() const { return params_; }
  bool initialized() const { return initialized_; }
  double last_time() const { return last_time_; }

  Mat3 measurement_covariance(const Detection& det) const {
    switch (params_.cov_mode) {
      case CovarianceMode::Reported:
        return det.Z;
      case CovarianceMode::MotionDependent:
        return interceptlab::measurement_cov(det.observer, det.ray_body, det.range,
                                             params_.sigma_l, params_.sigma_zeta3,
                                             orientation_cov(det.observer.omega, params_.c_alpha));
      case CovarianceMode::Static: {
        const double s2 = params_.sigma_alpha_static * params_.sigma_alpha_static;
        return interceptlab::measurement_cov(det.observer, det.ray_body, det.range,
                                             params_.sigma_l, params_.sigma_zeta3,
                                             s2 * Mat3::Identity());
      }
    }
    return det.Z;
  }

  void update(const Detection& det) {
    const Measurement m{det.z, measurement_covariance(det)};
    if (!initialized_) {
      initialize(det.time, m);
      return;
    }
    step(det.time, m);
  }

  // Predict-only advance, e.g. for a missed detection.
  void predict_to(double time) {
    if (!initialized_ || time <= last_time_) return;
    step(time, std::nullopt);
  }

  GaussianBelief estimate() const {
    return params_.kind == FilterKind::IMM ? imm_.fused : single_;
  }

  // Zero-jerk extrapolation of the current mean to `time`.
  TargetStateCA extrapolate(double time) const {
    const TargetStateCA x = estimate().state();
    const double dt = time - last_time_;
    if (!(dt > 0.0)) return x;
    return rollout_ca(x, 1, dt).front();
  }

  const ImmBelief& imm_belief() const { return imm_; }

 private:
  void initialize(double time, const Measurement& m) {
    const Mat2 pi = markov_matrix(params_.p_cv_to_ca, params_.p_ca_to_cv);
    imm_ = imm_initialize(m.z, m.Z, params_.imm(), pi, params_.init);
    if (params_.kind == FilterKind::CV) {
      single_ = imm_.beliefs[kCv];
    } else {
      single_ = imm_.beliefs[kCa];
    }
    last_time_ = time;
    initialized_ = true;
  }

  void step(double time, const std::optional<Measurement>& m) {
    const double dt = time - last_time_;
    if (!(dt > 0.0)) throw ParameterError("TargetTracker: timestamps must increase");
    if (params_.kind == FilterKind::IMM) {
      imm_ = imm_step(imm_, params_.imm(), m, dt);
    } else {
      const bool cv = params_.kind == FilterKind::CV;
      const LinearModel model =
          build_model({cv ? MotionModel::CV : MotionModel::CA, dt,
                       cv ? params_.sigma_a : params_.sigma_j, params_.sigma_pin});
      single_ = kf_predict(single_, model);
      if (m) single_ = kf_update(single_, m->z, m->Z, model.H).belief;
    }
    last_time_ = time;
  }

  FilterParams params_;
  bool initialized_ = false;
  double last_time_ = 0.0;
  ImmBelief imm_;
  GaussianBelief single_;
};

}  // namespace interceptlab
