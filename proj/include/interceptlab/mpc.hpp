#pragma once

// Interception MPC. The interceptor is a double integrator driven by the
// commanded acceleration u_k (held over step k); the target is rolled out
// with the zero-jerk CA model. Minimizes sum_k e_k' W_e e_k + u_k' W_u u_k
// over k = 1..N predicted position errors, with box limits on u and on the
// predicted velocities. The problem is condensed to a dense QP over
// U = [u_0 .. u_{N-1}].

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "interceptlab/estimation.hpp"
#include "interceptlab/guidance.hpp"
#include "interceptlab/qp.hpp"

namespace interceptlab {

struct MpcParams {
  int N = 40;
  double dt = 0.2;
  Mat3 W_e = Mat3::Identity();
  Mat3 W_u = 0.1 * Mat3::Identity();
  Vec3 v_max = Vec3(8, 8, 4);
  Vec3 a_max = Vec3(4, 4, 2);
  QpSettings qp;

  void validate() const {
    if (N < 1) throw ParameterError("MpcParams: N must be >= 1");
    if (!(dt > 0)) throw ParameterError("MpcParams: dt must be positive");
    if (!is_psd(W_e)) throw ParameterError("MpcParams: W_e must be PSD");
    Eigen::LLT<Mat3> llt(W_u);
    if (!is_symmetric(W_u) || llt.info() != Eigen::Success) {
      throw ParameterError("MpcParams: W_u must be positive definite");
    }
    if (!((v_max.array() > 0).all() && (a_max.array() > 0).all())) {
      throw ParameterError("MpcParams: limits must be positive");
    }
  }

  bool separable() const {
    return W_e.isDiagonal(0.0) && W_u.isDiagonal(0.0);
  }
};

struct InterceptorPV {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

struct MpcProblem {
  MpcParams params;
  InterceptorPV x_int0;
  TargetStateCA x_tgt0;
};

inline std::vector<Vec3> predict_target(const TargetStateCA& x_tgt0, int N, double dt) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(N));
  for (const auto& s : rollout_ca(x_tgt0, N, dt)) out.push_back(s.p);
  return out;
}

namespace detail {

// Scalar double-integrator prediction matrices: p_k = k dt v0 + Mu U,
// v_k = v0 + Nu U, k = 1..N.
struct ScalarPrediction {
  MatX Mu;
  MatX Nu;
};

inline ScalarPrediction scalar_prediction(int N, double dt) {
  ScalarPrediction s{MatX::Zero(N, N), MatX::Zero(N, N)};
  for (int k = 1; k <= N; ++k) {
    for (int j = 0; j < k; ++j) {
      s.Mu(k - 1, j) = (k - j - 0.5) * dt * dt;
      s.Nu(k - 1, j) = dt;
    }
  }
  return s;
}

// Reference for the position error: r_k = p_tgt,k - p0 - k dt v0.
inline VecX error_reference(const MpcProblem& pb, const std::vector<Vec3>& target, int axis) {
  const int N = pb.params.N;
  VecX r(N);
  for (int k = 1; k <= N; ++k) {
    r[k - 1] = target[static_cast<std::size_t>(k - 1)][axis] - pb.x_int0.p[axis] -
               k * pb.params.dt * pb.x_int0.v[axis];
  }
  return r;
}

}  // namespace detail

// Full 3N-variable condensed QP, variables ordered [u_0x u_0y u_0z u_1x ...].
inline DenseQp condense(const MpcProblem& pb) {
  const MpcParams& prm = pb.params;
  prm.validate();
  const int N = prm.N;
  const int n = 3 * N;
  const auto s = detail::scalar_prediction(N, prm.dt);
  const auto target = predict_target(pb.x_tgt0, N, prm.dt);

  MatX Mu = MatX::Zero(n, n), Nu = MatX::Zero(n, n);
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < N; ++j) {
      Mu.block<3, 3>(3 * k, 3 * j) = s.Mu(k, j) * Mat3::Identity();
      Nu.block<3, 3>(3 * k, 3 * j) = s.Nu(k, j) * Mat3::Identity();
    }
  }
  MatX We = MatX::Zero(n, n), Wu = MatX::Zero(n, n);
  VecX r(n), v_lo(n), v_hi(n), a_lim(n);
  for (int k = 0; k < N; ++k) {
    We.block<3, 3>(3 * k, 3 * k) = prm.W_e;
    Wu.block<3, 3>(3 * k, 3 * k) = prm.W_u;
    r.segment<3>(3 * k) = target[static_cast<std::size_t>(k)] - pb.x_int0.p -
                          (k + 1) * prm.dt * pb.x_int0.v;
    v_lo.segment<3>(3 * k) = -prm.v_max - pb.x_int0.v;
    v_hi.segment<3>(3 * k) = prm.v_max - pb.x_int0.v;
    a_lim.segment<3>(3 * k) = prm.a_max;
  }
  DenseQp qp;
  qp.Q = symmetrized(MatX(2.0 * (Mu.transpose() * We * Mu + Wu)));
  qp.q = -2.0 * Mu.transpose() * We * r;
  qp.A.resize(2 * n, n);
  qp.A << MatX::Identity(n, n), Nu;
  qp.lower.resize(2 * n);
  qp.upper.resize(2 * n);
  qp.lower << -a_lim, v_lo;
  qp.upper << a_lim, v_hi;
  return qp;
}

// Single-axis QP when the weights are diagonal.
inline DenseQp condense_axis(const MpcProblem& pb, int axis) {
  const MpcParams& prm = pb.params;
  const int N = prm.N;
  const auto s = detail::scalar_prediction(N, prm.dt);
  const auto target = predict_target(pb.x_tgt0, N, prm.dt);
  const double we = prm.W_e(axis, axis), wu = prm.W_u(axis, axis);
  const VecX r = detail::error_reference(pb, target, axis);
  DenseQp qp;
  qp.Q = symmetrized(MatX(2.0 * (we * s.Mu.transpose() * s.Mu + wu * MatX::Identity(N, N))));
  qp.q = -2.0 * we * s.Mu.transpose() * r;
  qp.A.resize(2 * N, N);
  qp.A << MatX::Identity(N, N), s.Nu;
  qp.lower.resize(2 * N);
  qp.upper.resize(2 * N);
  qp.lower << VecX::Constant(N, -prm.a_max[axis]), VecX::Constant(N, -prm.v_max[axis] - pb.x_int0.v[axis]);
  qp.upper << VecX::Constant(N, prm.a_max[axis]), VecX::Constant(N, prm.v_max[axis] - pb.x_int0.v[axis]);
  return qp;
}

struct MpcSolution {
  std::vector<Vec3> U;
  std::vector<Vec3> predicted_positions;  // interceptor, k = 1..N
  std::vector<Vec3> predicted_velocities;
  std::vector<Vec3> target_positions;
  double cost = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool converged = false;
};

// Evaluates J(U) directly from a rollout.
inline double mpc_cost(const MpcProblem& pb, const std::vector<Vec3>& U) {
  const MpcParams& prm = pb.params;
  const auto target = predict_target(pb.x_tgt0, prm.N, prm.dt);
  Vec3 p = pb.x_int0.p, v = pb.x_int0.v;
  double J = 0.0;
  for (int k = 0; k < prm.N; ++k) {
    const Vec3& u = U[static_cast<std::size_t>(k)];
    p += v * prm.dt + 0.5 * u * prm.dt * prm.dt;
    v += u * prm.dt;
    const Vec3 e = target[static_cast<std::size_t>(k)] - p;
    J += e.dot(prm.W_e * e) + u.dot(prm.W_u * u);
  }
  return J;
}

struct MpcNotConverged : Error {
  MpcNotConverged(GuidanceCommand cmd, MpcSolution sol)
      : Error("mpc_plan: QP solver did not converge"), command(cmd), solution(std::move(sol)) {}
  GuidanceCommand command;
  MpcSolution solution;
};

// Receding-horizon planner. Caches the QP factorization (it depends only on
// the parameters) and warm-starts from the previous solution shifted by one
// step.
class MpcPlanner {
 public:
  explicit MpcPlanner(MpcParams params) : params_(std::move(params)) {
    params_.validate();
    if (params_.separable()) {
      MpcProblem probe{params_, {}, {}};
      for (int axis = 0; axis < 3; ++axis) {
        const DenseQp qp = condense_axis(probe, axis);
        solvers_.push_back(std::make_unique<QpSolver>(qp.Q, qp.A, params_.qp));
      }
    } else {
      MpcProblem probe{params_, {}, {}};
      const DenseQp qp = condense(probe);
      solvers_.push_back(std::make_unique<QpSolver>(qp.Q, qp.A, params_.qp));
    }
    warm_.resize(solvers_.size());
  }

  const MpcParams& params() const { return params_; }
  void reset_warm_start() {
    for (auto& w : warm_) w.reset();
  }

  MpcSolution solve(const InterceptorPV& x_int, const TargetStateCA& x_tgt) {
    const MpcProblem pb{params_, x_int, x_tgt};
    const int N = params_.N;
    MpcSolution sol;
    sol.U.assign(static_cast<std::size_t>(N), Vec3::Zero());
    sol.converged = true;

    auto run = [&](std::size_t idx, const DenseQp& qp) {
      const QpWarmStart* ws = warm_[idx] ? &*warm_[idx] : nullptr;
      QpResult r = solvers_[idx]->solve(qp, ws);
      sol.iterations = std::max(sol.iterations, r.iterations);
      sol.primal_residual = std::max(sol.primal_residual, r.primal_residual);
      sol.dual_residual = std::max(sol.dual_residual, r.dual_residual);
      sol.converged = sol.converged && r.converged;
      warm_[idx] = shifted(r, qp.num_vars() / N, N);
      return r;
    };

    if (solvers_.size() == 3) {
      for (int axis = 0; axis < 3; ++axis) {
        const QpResult r = run(static_cast<std::size_t>(axis), condense_axis(pb, axis));
        for (int k = 0; k < N; ++k) sol.U[static_cast<std::size_t>(k)][axis] = r.x[k];
      }
    } else {
      const QpResult r = run(0, condense(pb));
      for (int k = 0; k < N; ++k) sol.U[static_cast<std::size_t>(k)] = r.x.segment<3>(3 * k);
    }
    // exact box feasibility
    for (auto& u : sol.U) u = clamp_box(u, params_.a_max);

    sol.target_positions = predict_target(x_tgt, N, params_.dt);
    Vec3 p = x_int.p, v = x_int.v;
    for (int k = 0; k < N; ++k) {
      const Vec3& u = sol.U[static_cast<std::size_t>(k)];
      p += v * params_.dt + 0.5 * u * params_.dt * params_.dt;
      v += u * params_.dt;
      sol.predicted_positions.push_back(p);
      sol.predicted_velocities.push_back(v);
    }
    sol.cost = mpc_cost(pb, sol.U);
    return sol;
  }

  // u_0 as the commanded acceleration, heading toward the predicted target.
  GuidanceCommand command(const InterceptorPV& x_int, const TargetStateCA& x_tgt,
                          MpcSolution* out = nullptr) {
    MpcSolution sol = solve(x_int, x_tgt);
    const Vec3 aim = sol.target_positions.front() - x_int.p;
    GuidanceCommand cmd = make_command(sol.U.front(), aim);
    if (out) *out = std::move(sol);
    return cmd;
  }

 private:
  static QpWarmStart shifted(const QpResult& r, Eigen::Index width, int N) {
    QpWarmStart w;
    const Eigen::Index n = r.x.size();
    w.x.resize(n);
    w.x.head(n - width) = r.x.tail(n - width);
    w.x.tail(width) = r.x.tail(width);
    const Eigen::Index m = r.y.size();
    w.y = VecX::Zero(m);
    // two stacked blocks of N*width rows (inputs, velocities)
    const Eigen::Index block = static_cast<Eigen::Index>(N) * width;
    if (m == 2 * block) {
      for (int b = 0; b < 2; ++b) {
        w.y.segment(b * block, block - width) = r.y.segment(b * block + width, block - width);
      }
    }
    return w;
  }

  MpcParams params_;
  std::vector<std::unique_ptr<QpSolver>> solvers_;
  std::vector<std::optional<QpWarmStart>> warm_;
};

// One-shot receding-horizon plan. Throws MpcNotConverged (carrying the
// best-effort command) when the solver stops early.
inline GuidanceCommand mpc_plan(const InterceptorPV& x_int, const TargetStateCA& x_tgt,
                                const MpcParams& params) {
  MpcPlanner planner(params);
  MpcSolution sol;
  GuidanceCommand cmd = planner.command(x_int, x_tgt, &sol);
  if (!sol.converged) throw MpcNotConverged(cmd, std::move(sol));
  return cmd;
}

}  // namespace interceptlab
