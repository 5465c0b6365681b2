#pragma once

// Target state estimation: CV and CA Kalman filters sharing a 9-dim state
// space [p v a], and the two-model IMM built on top of them.

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "interceptlab/numcore.hpp"

namespace interceptlab {

using State9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using MeasMatrix = Eigen::Matrix<double, 3, 9>;
using Mat2 = Eigen::Matrix2d;

struct TargetStateCA {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();

  State9 stacked() const {
    State9 x;
    x << p, v, a;
    return x;
  }
  static TargetStateCA from_stacked(const State9& x) {
    return {x.segment<3>(0), x.segment<3>(3), x.segment<3>(6)};
  }
};

struct GaussianBelief {
  State9 mean = State9::Zero();
  Mat9 cov = Mat9::Identity();

  TargetStateCA state() const { return TargetStateCA::from_stacked(mean); }
};

enum class MotionModel { CV, CA };

struct ModelSpec {
  MotionModel kind = MotionModel::CV;
  double dt = 0.1;
  // sigma_a (m/s^2) for CV, sigma_j (m/s^3) for CA.
  double noise = 1.0;
  // CV only: stdev the acceleration block is pinned to. Keeps mixing into CA
  // well-posed.
  double sigma_pin = 1e-2;
};

struct LinearModel {
  Mat9 A;
  Mat9 Xi;
  MeasMatrix H;
};

inline MeasMatrix position_selector() {
  MeasMatrix h = MeasMatrix::Zero();
  h.leftCols<3>().setIdentity();
  return h;
}

inline LinearModel build_model(const ModelSpec& spec) {
  if (!(spec.dt > 0.0) || !std::isfinite(spec.dt)) {
    throw ParameterError("build_model: dt must be positive");
  }
  if (!(spec.noise >= 0.0) || !(spec.sigma_pin >= 0.0)) {
    throw ParameterError("build_model: noise scales must be nonnegative");
  }
  const double dt = spec.dt;
  const Mat3 I = Mat3::Identity();
  LinearModel m;
  m.A.setZero();
  m.Xi.setZero();
  m.H = position_selector();

  if (spec.kind == MotionModel::CV) {
    m.A.block<3, 3>(0, 0) = I;
    m.A.block<3, 3>(0, 3) = dt * I;
    m.A.block<3, 3>(3, 3) = I;
    // acceleration block has no dynamics: a is reset to zero every step
    Eigen::Matrix<double, 6, 3> B;
    B << 0.5 * dt * dt * I, dt * I;
    m.Xi.topLeftCorner<6, 6>() = spec.noise * spec.noise * B * B.transpose();
    m.Xi.block<3, 3>(6, 6) = spec.sigma_pin * spec.sigma_pin * I;
  } else {
    m.A.block<3, 3>(0, 0) = I;
    m.A.block<3, 3>(0, 3) = dt * I;
    m.A.block<3, 3>(0, 6) = 0.5 * dt * dt * I;
    m.A.block<3, 3>(3, 3) = I;
    m.A.block<3, 3>(3, 6) = dt * I;
    m.A.block<3, 3>(6, 6) = I;
    Eigen::Matrix<double, 9, 3> B;
    B << dt * dt * dt / 6.0 * I, 0.5 * dt * dt * I, dt * I;
    m.Xi = spec.noise * spec.noise * B * B.transpose();
  }
  return m;
}

inline GaussianBelief kf_predict(const GaussianBelief& b, const Mat9& A, const Mat9& Xi) {
  GaussianBelief out;
  out.mean = A * b.mean;
  out.cov = symmetrized(Mat9(A * b.cov * A.transpose() + Xi));
  return out;
}

inline GaussianBelief kf_predict(const GaussianBelief& b, const LinearModel& m) {
  return kf_predict(b, m.A, m.Xi);
}

struct KfUpdateResult {
  GaussianBelief belief;
  Vec3 innovation;
  double likelihood = 0.0;
  double log_likelihood = -std::numeric_limits<double>::infinity();
};

// Standard Kalman correction with a Joseph-form covariance update. The
// innovation covariance is eigenvalue-floored at kPsdFloor before inversion.
inline KfUpdateResult kf_update(const GaussianBelief& b, const Vec3& z, const Mat3& Z,
                                const MeasMatrix& H) {
  const Vec3 innovation = z - H * b.mean;
  const Mat3 S_raw = symmetrized(Mat3(H * b.cov * H.transpose() + Z));
  if (!S_raw.allFinite()) {
    throw FilterDivergence("kf_update: non-finite innovation covariance");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es;
  es.computeDirect(S_raw);
  const Vec3 lambda = es.eigenvalues().cwiseMax(kPsdFloor);
  if (!(lambda.minCoeff() > 0.0) || !lambda.allFinite()) {
    throw FilterDivergence("kf_update: singular innovation covariance");
  }
  const Mat3& V = es.eigenvectors();
  const Mat3 S_inv = V * lambda.cwiseInverse().asDiagonal() * V.transpose();

  const Eigen::Matrix<double, 9, 3> K = b.cov * H.transpose() * S_inv;
  const Mat9 IKH = Mat9::Identity() - K * H;

  KfUpdateResult r;
  r.innovation = innovation;
  r.belief.mean = b.mean + K * innovation;
  r.belief.cov = symmetrized(Mat9(IKH * b.cov * IKH.transpose() + K * Z * K.transpose()));

  const double maha = innovation.dot(S_inv * innovation);
  const double log_det = lambda.array().log().sum();
  r.log_likelihood = -0.5 * (maha + log_det + 3.0 * std::log(2.0 * M_PI));
  r.likelihood = std::exp(r.log_likelihood);
  return r;
}

struct ImmParams {
  double sigma_a = 1.0;    // CV white-acceleration stdev (m/s^2)
  double sigma_j = 1.0;    // CA white-jerk stdev (m/s^3)
  double sigma_pin = 1e-2; // CV acceleration pin (m/s^2)
};

inline constexpr std::size_t kCv = 0;
inline constexpr std::size_t kCa = 1;

struct ImmBelief {
  std::array<GaussianBelief, 2> beliefs;   // per-model, after mixing
  std::array<GaussianBelief, 2> filtered;  // per-model, before mixing
  std::array<double, 2> mu{0.5, 0.5};
  // transition(i, j): probability of switching from model i to model j
  Mat2 transition = (Mat2() << 0.95, 0.05, 0.05, 0.95).finished();
  GaussianBelief fused;
  bool degenerate_update = false;
};

inline Mat2 markov_matrix(double p_cv_to_ca, double p_ca_to_cv) {
  Mat2 m;
  m << 1.0 - p_cv_to_ca, p_cv_to_ca, p_ca_to_cv, 1.0 - p_ca_to_cv;
  return m;
}

// Probability-weighted moment match of a set of Gaussians.
template <std::size_t M>
GaussianBelief mix_gaussians(const std::array<GaussianBelief, M>& parts,
                             const std::array<double, M>& weights) {
  GaussianBelief out;
  out.mean.setZero();
  for (std::size_t i = 0; i < M; ++i) {
    if (weights[i] != 0.0) out.mean += weights[i] * parts[i].mean;
  }
  out.cov.setZero();
  for (std::size_t i = 0; i < M; ++i) {
    if (weights[i] == 0.0) continue;
    const State9 d = parts[i].mean - out.mean;
    out.cov += weights[i] * (parts[i].cov + d * d.transpose());
  }
  out.cov = symmetrized(out.cov);
  return out;
}

struct ImmInitCov {
  double velocity_var = 25.0;
  double acceleration_var = 25.0;
};

// First detection: position from z with covariance Z, zero velocity and
// acceleration with broad priors.
inline ImmBelief imm_initialize(const Vec3& z, const Mat3& Z, const ImmParams& params,
                                const Mat2& transition, const ImmInitCov& init = {},
                                std::array<double, 2> mu = {0.5, 0.5}) {
  ImmBelief b;
  b.transition = transition;
  b.mu = mu;
  for (std::size_t j = 0; j < 2; ++j) {
    GaussianBelief g;
    g.mean.setZero();
    g.mean.head<3>() = z;
    g.cov.setZero();
    g.cov.block<3, 3>(0, 0) = symmetrized(Z);
    g.cov.block<3, 3>(3, 3) = init.velocity_var * Mat3::Identity();
    const double acc_var =
        j == kCv ? params.sigma_pin * params.sigma_pin : init.acceleration_var;
    g.cov.block<3, 3>(6, 6) = acc_var * Mat3::Identity();
    b.beliefs[j] = g;
    b.filtered[j] = g;
  }
  b.fused = mix_gaussians(b.filtered, b.mu);
  return b;
}

struct Measurement {
  Vec3 z;
  Mat3 Z;
};

// One IMM cycle: filtering (predict each model, update with z when present),
// model-probability update from the innovation likelihoods, mixing
// (re-initialization of each model) and fusion. Without a measurement the
// models are only predicted and mu is left unchanged.
inline ImmBelief imm_step(const ImmBelief& b, const ImmParams& params,
                          const std::optional<Measurement>& meas, double dt) {
  const std::array<LinearModel, 2> models = {
      build_model({MotionModel::CV, dt, params.sigma_a, params.sigma_pin}),
      build_model({MotionModel::CA, dt, params.sigma_j, params.sigma_pin})};

  ImmBelief out = b;
  out.degenerate_update = false;
  std::array<double, 2> log_lik{};
  for (std::size_t j = 0; j < 2; ++j) {
    out.filtered[j] = kf_predict(b.beliefs[j], models[j]);
    if (meas) {
      KfUpdateResult r = kf_update(out.filtered[j], meas->z, meas->Z, models[j].H);
      out.filtered[j] = r.belief;
      log_lik[j] = r.log_likelihood;
    }
  }

  if (!meas) {
    out.beliefs = out.filtered;
    out.fused = mix_gaussians(out.filtered, out.mu);
    return out;
  }

  // mu_j <- Lambda_j * sum_i Pi_ij mu_i, normalized (in log space)
  std::array<double, 2> prior{};
  for (std::size_t j = 0; j < 2; ++j) {
    prior[j] = b.transition(0, j) * b.mu[0] + b.transition(1, j) * b.mu[1];
  }
  const double lmax = std::max(log_lik[0], log_lik[1]);
  if (!std::isfinite(lmax)) {
    out.degenerate_update = true;
  } else {
    std::array<double, 2> w{};
    double total = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      w[j] = std::isfinite(log_lik[j]) ? prior[j] * std::exp(log_lik[j] - lmax) : 0.0;
      total += w[j];
    }
    if (total > 0.0 && std::isfinite(total)) {
      out.mu = {w[0] / total, w[1] / total};
    } else {
      out.degenerate_update = true;
    }
  }

  // mixing: mu^{i|j} = Pi_ij mu_i / sum_k Pi_kj mu_k
  for (std::size_t j = 0; j < 2; ++j) {
    const double norm = b.transition(0, j) * out.mu[0] + b.transition(1, j) * out.mu[1];
    if (!(norm > 0.0)) {
      out.beliefs[j] = out.filtered[j];
      continue;
    }
    const std::array<double, 2> cond = {b.transition(0, j) * out.mu[0] / norm,
                                        b.transition(1, j) * out.mu[1] / norm};
    out.beliefs[j] = mix_gaussians(out.filtered, cond);
  }
  out.fused = mix_gaussians(out.filtered, out.mu);
  return out;
}

// Zero-jerk CA rollout of a state estimate, N steps of dt.
inline std::vector<TargetStateCA> rollout_ca(const TargetStateCA& x0, int steps, double dt) {
  if (steps < 1) throw ParameterError("rollout: need at least one step");
  const LinearModel m = build_model({MotionModel::CA, dt, 0.0, 0.0});
  std::vector<TargetStateCA> out;
  out.reserve(static_cast<std::size_t>(steps));
  State9 x = x0.stacked();
  for (int k = 0; k < steps; ++k) {
    x = m.A * x;
    out.push_back(TargetStateCA::from_stacked(x));
  }
  return out;
}

inline std::vector<TargetStateCA> predict_horizon(const ImmBelief& b, int steps, double dt) {
  return rollout_ca(b.fused.state(), steps, dt);
}

// Invariant probes used by tests and the scenario runner.
inline bool mu_on_simplex(const ImmBelief& b, double tol = 1e-12) {
  return b.mu[0] >= -tol && b.mu[1] >= -tol && std::abs(b.mu[0] + b.mu[1] - 1.0) <= tol;
}

inline bool covariances_psd(const ImmBelief& b, double tol = 1e-9) {
  for (const auto& g : b.beliefs) {
    if (!is_psd(g.cov, tol)) return false;
  }
  for (const auto& g : b.filtered) {
    if (!is_psd(g.cov, tol)) return false;
  }
  return is_psd(b.fused.cov, tol);
}

}  // namespace interceptlab
