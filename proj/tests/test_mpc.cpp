#include <gtest/gtest.h>

#include <random>

#include "interceptlab/mpc.hpp"

using namespace interceptlab;

namespace {

MatX random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatX b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = g(rng);
  return b * b.transpose() + 0.5 * MatX::Identity(n, n);
}

MpcParams small_params(int N, double dt, double a_max) {
  MpcParams p;
  p.N = N;
  p.dt = dt;
  p.a_max = Vec3::Constant(a_max);
  p.v_max = Vec3::Constant(1e6);
  p.qp.tol = 1e-9;
  p.qp.max_iter = 20000;
  return p;
}

// Interceptor positions as an affine map of U, built from unit-impulse rollouts.
void rollout_matrix(const MpcParams& p, const InterceptorPV& x0, MatX& M, VecX& c) {
  const int n = 3 * p.N;
  auto positions = [&](const VecX& u) {
    VecX out(n);
    Vec3 pos = x0.p, vel = x0.v;
    for (int k = 0; k < p.N; ++k) {
      const Vec3 a = u.segment<3>(3 * k);
      pos += vel * p.dt + 0.5 * a * p.dt * p.dt;
      vel += a * p.dt;
      out.segment<3>(3 * k) = pos;
    }
    return out;
  };
  c = positions(VecX::Zero(n));
  M.resize(n, n);
  for (int j = 0; j < n; ++j) M.col(j) = positions(VecX::Unit(n, j)) - c;
}

}  // namespace

TEST(PredictTarget, ConstantAndLinear) {
  const auto still = predict_target({Vec3(1, 2, 3), Vec3::Zero(), Vec3::Zero()}, 4, 0.3);
  for (const auto& p : still) EXPECT_EQ(p, Vec3(1, 2, 3));
  const auto line = predict_target({Vec3::Zero(), Vec3(1, 0, 0), Vec3::Zero()}, 3, 1.0);
  EXPECT_TRUE(line[2].isApprox(Vec3(3, 0, 0)));
}

TEST(PredictTarget, DiscreteRolloutMatchesContinuousFormula) {
  const auto ps = predict_target({Vec3::Zero(), Vec3::Zero(), Vec3(0, 1, 0)}, 4, 0.5);
  EXPECT_NEAR(ps[3].y(), 2.0, 1e-12);
}

TEST(Condense, SingleStepClosedForm) {
  for (double w : {1e-12, 0.1, 1.0}) {
    MpcParams p = small_params(1, 1.0, 100.0);
    p.W_u = w * Mat3::Identity();
    const MpcProblem pb{p, {}, {Vec3(1, 0, 0), Vec3::Zero(), Vec3::Zero()}};
    const DenseQp qp = condense(pb);
    const VecX u = qp.Q.ldlt().solve(-qp.q);
    EXPECT_NEAR(u(0), 2.0 / (1.0 + 4.0 * w), 1e-9) << "w=" << w;
    EXPECT_NEAR(u(1), 0.0, 1e-15);
  }
}

TEST(Condense, HeavyInputWeightDrivesInputToZero) {
  MpcParams p = small_params(1, 1.0, 100.0);
  p.W_u = 1e9 * Mat3::Identity();
  const DenseQp qp = condense({p, {}, {Vec3(1, 0, 0), Vec3::Zero(), Vec3::Zero()}});
  EXPECT_LT(std::abs(qp.Q.ldlt().solve(-qp.q)(0)), 1e-8);
}

TEST(Condense, HessianIsSpdAndObjectiveMatchesCost) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    MpcParams p = small_params(6, 0.2, 4.0);
    Mat3 b;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) b(i, j) = g(rng);
    p.W_e = b * b.transpose();
    p.W_u = 0.1 * Mat3::Identity() + 0.01 * b.transpose() * b;
    const MpcProblem pb{p,
                        {Vec3(g(rng), g(rng), g(rng)), Vec3(g(rng), g(rng), g(rng))},
                        {Vec3(5, g(rng), 2), Vec3(g(rng), 1, 0), Vec3(0, g(rng), 0)}};
    const DenseQp qp = condense(pb);
    Eigen::LLT<MatX> llt(qp.Q);
    EXPECT_EQ(llt.info(), Eigen::Success);
    // J(U) - J(0) equals the QP objective
    std::vector<Vec3> U(6), Z(6, Vec3::Zero());
    VecX x(18);
    for (int k = 0; k < 6; ++k) {
      U[k] = Vec3(g(rng), g(rng), g(rng));
      x.segment<3>(3 * k) = U[k];
    }
    EXPECT_NEAR(mpc_cost(pb, U) - mpc_cost(pb, Z), qp.objective(x), 1e-9 * (1 + std::abs(qp.objective(x))));
  }
}

TEST(SolveQp, ActiveUpperBound) {
  DenseQp qp = DenseQp::from_inequalities(MatX::Constant(1, 1, 2.0), VecX::Constant(1, -6.0),
                                          MatX::Constant(1, 1, 1.0), VecX::Constant(1, 1.0));
  const QpResult r = solve_qp(qp);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.x(0), 1.0, 1e-6);
  EXPECT_NEAR(r.y(0), 4.0, 1e-5);
}

TEST(SolveQp, UnconstrainedMatchesLinearSolve) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 8;
    DenseQp qp;
    qp.Q = random_spd(n, rng);
    qp.q = VecX::NullaryExpr(n, [&] { return g(rng); });
    qp.A = MatX(0, n);
    qp.lower = qp.upper = VecX(0);
    const QpResult r = solve_qp(qp);
    const VecX oracle = qp.Q.llt().solve(-qp.q);
    EXPECT_LT((r.x - oracle).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(SolveQp, TwoDimensionalActiveInequalityAgainstGrid) {
  // min (x-2)^2 + (y-1)^2 + 0.5 x y  s.t.  x + y <= 1
  MatX Q(2, 2);
  Q << 2, 0.5, 0.5, 2;
  VecX q(2);
  q << -4, -2;
  MatX G(1, 2);
  G << 1, 1;
  const DenseQp qp = DenseQp::from_inequalities(Q, q, G, VecX::Constant(1, 1.0));
  const QpResult r = solve_qp(qp);
  ASSERT_TRUE(r.converged);
  const KktResiduals k = kkt_residuals(qp, r.x, r.y);
  EXPECT_LT(k.stationarity, 1e-6);
  EXPECT_LT(k.primal, 1e-6);
  EXPECT_LT(k.dual_sign, 1e-6);
  EXPECT_LT(k.complementarity, 1e-6);

  const double h = 1e-3;
  double best = kInf;
  Eigen::Vector2d arg;
  for (double x = -1; x <= 3; x += h) {
    // the constraint is active at the optimum; scan the boundary and a slab inside
    for (double y = 1 - x - 0.02; y <= 1 - x + 1e-12; y += h) {
      Eigen::Vector2d v(x, y);
      const double f = qp.objective(v);
      if (f < best) {
        best = f;
        arg = v;
      }
    }
  }
  EXPECT_LT((r.x - arg).cwiseAbs().maxCoeff(), 2 * h);
  EXPECT_LE(qp.objective(r.x), best + 1e-9);
}

TEST(SolveQp, RandomBoxConstrainedKkt) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 10, m = 15;
    DenseQp qp;
    qp.Q = random_spd(n, rng);
    qp.q = 3.0 * VecX::NullaryExpr(n, [&] { return g(rng); });
    qp.A = MatX::NullaryExpr(m, n, [&] { return g(rng); });
    qp.lower = VecX::Constant(m, -1.0);
    qp.upper = VecX::Constant(m, 1.0);
    const QpResult r = solve_qp(qp);
    ASSERT_TRUE(r.converged);
    const KktResiduals k = kkt_residuals(qp, r.x, r.y);
    EXPECT_LT(std::max({k.stationarity, k.primal, k.dual_sign, k.complementarity}), 1e-6);
  }
}

TEST(SolveQp, IterationCapReportsNonConvergence) {
  std::mt19937_64 rng(6);
  DenseQp qp;
  qp.Q = random_spd(6, rng);
  qp.q = VecX::Constant(6, 5.0);
  qp.A = MatX::Identity(6, 6);
  qp.lower = VecX::Constant(6, -0.1);
  qp.upper = VecX::Constant(6, 0.1);
  QpSettings s;
  s.max_iter = 1;
  s.check_every = 1;
  s.polish = false;
  const QpResult r = solve_qp(qp, s);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 1);
}

TEST(SolveQp, WarmStartAtOptimumConvergesFast) {
  std::mt19937_64 rng(7);
  DenseQp qp;
  qp.Q = random_spd(6, rng);
  qp.q = VecX::Constant(6, 2.0);
  qp.A = MatX::Identity(6, 6);
  qp.lower = VecX::Constant(6, -0.2);
  qp.upper = VecX::Constant(6, 0.2);
  const QpResult cold = solve_qp(qp);
  ASSERT_TRUE(cold.converged);
  const QpWarmStart ws{cold.x, cold.y};
  const QpResult warm = solve_qp(qp, {}, &ws);
  EXPECT_TRUE(warm.converged);
  EXPECT_LE(warm.iterations, cold.iterations);
}

TEST(SolveQp, RejectsIndefiniteOrMalformed) {
  MatX Q(2, 2);
  Q << 1, 0, 0, -1;
  EXPECT_THROW(QpSolver(Q, MatX(0, 2)), ContractViolation);
  MatX asym(2, 2);
  asym << 1, 1, 0, 1;
  EXPECT_THROW(QpSolver(asym, MatX(0, 2)), ContractViolation);
  EXPECT_THROW(QpSolver(MatX::Identity(2, 2), MatX::Identity(1, 3)), ContractViolation);
}

TEST(MpcPlan, AlreadyAtStationaryTarget) {
  const GuidanceCommand c = mpc_plan({Vec3(1, 2, 3), Vec3::Zero()}, {Vec3(1, 2, 3), Vec3::Zero(), Vec3::Zero()},
                                     MpcParams{});
  EXPECT_LT(c.a_cmd.norm(), 1e-5);
}

TEST(MpcPlan, UnconstrainedMatchesNormalEquations) {
  MpcParams p = small_params(3, 0.5, 1e6);
  p.W_e = Vec3(1.0, 2.0, 0.5).asDiagonal();
  p.W_u = Vec3(0.1, 0.3, 0.2).asDiagonal();
  const InterceptorPV x0{Vec3(0, 1, -1), Vec3(1, 0, 0.5)};
  const TargetStateCA tgt{Vec3(4, -2, 1), Vec3(0, 1, 0), Vec3(0.2, 0, 0)};

  MatX M;
  VecX c;
  rollout_matrix(p, x0, M, c);
  VecX t(9);
  const auto tp = predict_target(tgt, 3, p.dt);
  MatX We = MatX::Zero(9, 9), Wu = MatX::Zero(9, 9);
  for (int k = 0; k < 3; ++k) {
    t.segment<3>(3 * k) = tp[k];
    We.block<3, 3>(3 * k, 3 * k) = p.W_e;
    Wu.block<3, 3>(3 * k, 3 * k) = p.W_u;
  }
  const VecX oracle = (M.transpose() * We * M + Wu).ldlt().solve(M.transpose() * We * (t - c));

  MpcPlanner planner(p);
  const MpcSolution sol = planner.solve(x0, tgt);
  ASSERT_TRUE(sol.converged);
  for (int k = 0; k < 3; ++k) EXPECT_LT((sol.U[k] - oracle.segment<3>(3 * k)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(MpcPlan, FullCoupledPathAgreesWithSplitPath) {
  MpcParams p = small_params(5, 0.2, 2.0);
  const InterceptorPV x0{Vec3::Zero(), Vec3(0.5, 0, 0)};
  const TargetStateCA tgt{Vec3(6, 3, 1), Vec3(-1, 0, 0), Vec3::Zero()};
  const MpcSolution split = MpcPlanner(p).solve(x0, tgt);
  // an off-diagonal weight far below tolerance forces the coupled QP
  p.W_e(0, 1) = p.W_e(1, 0) = 1e-14;
  ASSERT_FALSE(p.separable());
  const MpcSolution full = MpcPlanner(p).solve(x0, tgt);
  for (int k = 0; k < 5; ++k) EXPECT_LT((split.U[k] - full.U[k]).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(MpcPlan, TightLimitsMatchBruteForce) {
  const double a_max = 1.0;
  MpcParams p = small_params(3, 0.5, a_max);
  const InterceptorPV x0{Vec3::Zero(), Vec3(0, -0.5, 0)};
  const TargetStateCA tgt{Vec3(5, 2, -1), Vec3(0, 1, 0), Vec3::Zero()};
  MpcPlanner planner(p);
  const MpcSolution sol = planner.solve(x0, tgt);
  ASSERT_TRUE(sol.converged);

  const int G = 21;
  const double step = 2 * a_max / (G - 1);
  for (int axis = 0; axis < 3; ++axis) {
    double best = kInf;
    Vec3 arg = Vec3::Zero();
    for (int i = 0; i < G; ++i)
      for (int j = 0; j < G; ++j)
        for (int k = 0; k < G; ++k) {
          std::vector<Vec3> U(3, Vec3::Zero());
          for (int s = 0; s < 3; ++s) U[s] = sol.U[s];
          U[0][axis] = -a_max + i * step;
          U[1][axis] = -a_max + j * step;
          U[2][axis] = -a_max + k * step;
          const double J = mpc_cost({p, x0, tgt}, U);
          if (J < best) {
            best = J;
            arg = Vec3(U[0][axis], U[1][axis], U[2][axis]);
          }
        }
    for (int s = 0; s < 3; ++s) EXPECT_LE(std::abs(sol.U[s][axis] - arg[s]), step) << "axis " << axis;
    EXPECT_LE(sol.cost, best + 1e-9);
  }
}

TEST(MpcPlan, NonConvergenceCarriesCommand) {
  MpcParams p;
  p.qp.max_iter = 1;
  p.qp.check_every = 1;
  p.qp.polish = false;
  try {
    mpc_plan({Vec3::Zero(), Vec3::Zero()}, {Vec3(30, 10, 2), Vec3(3, 0, 0), Vec3::Zero()}, p);
    FAIL() << "expected non-convergence";
  } catch (const MpcNotConverged& e) {
    EXPECT_TRUE(e.command.a_cmd.allFinite());
    EXPECT_FALSE(e.solution.converged);
  }
}

TEST(MpcParams, Validation) {
  MpcParams p;
  p.N = 0;
  EXPECT_THROW(p.validate(), ParameterError);
  p = {};
  p.W_u = Mat3::Zero();
  EXPECT_THROW(p.validate(), ParameterError);
  p = {};
  p.a_max.x() = 0;
  EXPECT_THROW(MpcPlanner{p}, ParameterError);
}
