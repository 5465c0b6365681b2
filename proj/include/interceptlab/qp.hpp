#pragma once

// Dense convex QP solver:
//
//   minimize   1/2 x'Qx + q'x
//   subject to lower <= A x <= upper
//
// Operator splitting (ADMM) on a Ruiz-equilibrated copy of the problem with
// a fixed penalty rho; the linear system is factored once per (Q, A) pair so
// repeated solves with new q/bounds only pay for matrix-vector products. An
// optional polishing pass solves the equality-constrained KKT system on the
// active set guessed by ADMM. Polishing is also tried during the iteration
// whenever the guessed active set changes, and ends the solve early when the
// polished point meets the tolerance.

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "interceptlab/numcore.hpp"

namespace interceptlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct DenseQp {
  MatX Q;
  VecX q;
  MatX A;      // m x n, may have zero rows
  VecX lower;  // -inf for one-sided rows
  VecX upper;

  Eigen::Index num_vars() const { return Q.rows(); }
  Eigen::Index num_constraints() const { return A.rows(); }

  // G x <= h
  static DenseQp from_inequalities(MatX Q, VecX q, MatX G, VecX h) {
    DenseQp p{std::move(Q), std::move(q), std::move(G), VecX(), std::move(h)};
    p.lower = VecX::Constant(p.upper.size(), -kInf);
    return p;
  }

  double objective(const VecX& x) const { return 0.5 * x.dot(Q * x) + q.dot(x); }
};

struct QpSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  int max_iter = 2000;
  double tol = 1e-6;
  int check_every = 5;
  int scaling_iters = 10;
  bool polish = true;
  // try polishing once both residuals drop below this; 0 = only at the end
  double polish_trigger = 1e-1;
  bool record_trace = false;
};

struct QpWarmStart {
  VecX x;
  VecX y;
};

struct QpResult {
  VecX x;
  VecX y;  // multipliers of A x; negative on active lower, positive on active upper
  int iterations = 0;
  double primal_residual = kInf;
  double dual_residual = kInf;
  bool converged = false;
  bool polished = false;
  double objective = kInf;
  // best objective among primal-feasible iterates, one entry per check
  std::vector<double> best_feasible_trace;
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual_sign = 0.0;
  double complementarity = 0.0;
  double max() const { return std::max({stationarity, primal, dual_sign, complementarity}); }
};

inline KktResiduals kkt_residuals(const DenseQp& qp, const VecX& x, const VecX& y) {
  KktResiduals r;
  VecX grad = qp.Q * x + qp.q;
  if (qp.num_constraints() > 0) grad += qp.A.transpose() * y;
  r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (qp.num_constraints() == 0) return r;
  const VecX ax = qp.A * x;
  for (Eigen::Index i = 0; i < ax.size(); ++i) {
    r.primal = std::max({r.primal, qp.lower[i] - ax[i], ax[i] - qp.upper[i]});
    if (y[i] > 0.0) {
      r.dual_sign = std::max(r.dual_sign, std::isfinite(qp.upper[i]) ? 0.0 : y[i]);
      if (std::isfinite(qp.upper[i])) {
        r.complementarity = std::max(r.complementarity, y[i] * std::abs(qp.upper[i] - ax[i]));
      }
    } else if (y[i] < 0.0) {
      r.dual_sign = std::max(r.dual_sign, std::isfinite(qp.lower[i]) ? 0.0 : -y[i]);
      if (std::isfinite(qp.lower[i])) {
        r.complementarity = std::max(r.complementarity, -y[i] * std::abs(ax[i] - qp.lower[i]));
      }
    }
  }
  return r;
}

class QpSolver {
 public:
  QpSolver(const MatX& Q, const MatX& A, QpSettings settings = {})
      : settings_(settings), Q_(Q), A_(A) {
    if (Q.rows() != Q.cols()) throw ContractViolation("QpSolver: Q must be square");
    if (A.rows() > 0 && A.cols() != Q.rows()) {
      throw ContractViolation("QpSolver: A column count must match Q");
    }
    if (!is_symmetric(Q)) throw ContractViolation("QpSolver: Q must be symmetric");
    equilibrate();
    const Eigen::Index n = Q.rows();
    MatX K = Qs_;
    K.diagonal().array() += settings_.sigma;
    if (As_.rows() > 0) K += settings_.rho * As_.transpose() * As_;
    Eigen::LLT<MatX> llt(K);
    if (llt.info() != Eigen::Success) {
      throw ContractViolation("QpSolver: Q is not positive semidefinite");
    }
    K_inv_ = llt.solve(MatX::Identity(n, n));
  }

  const QpSettings& settings() const { return settings_; }
  QpSettings& settings() { return settings_; }

  QpResult solve(const VecX& q, const VecX& lower, const VecX& upper,
                 const QpWarmStart* warm = nullptr) const {
    const Eigen::Index n = Q_.rows();
    const Eigen::Index m = A_.rows();
    if (q.size() != n || lower.size() != m || upper.size() != m) {
      throw ContractViolation("QpSolver::solve: dimension mismatch");
    }
    const double rho = settings_.rho;
    const double sigma = settings_.sigma;
    const double alpha = settings_.alpha;

    // scaled data
    const VecX qs = c_ * D_.cwiseProduct(q);
    const VecX ls = E_.cwiseProduct(lower);
    const VecX us = E_.cwiseProduct(upper);

    VecX x = VecX::Zero(n), z = VecX::Zero(m), y = VecX::Zero(m);
    if (warm && warm->x.size() == n) {
      x = warm->x.cwiseQuotient(D_);
      z = (As_ * x).cwiseMax(ls).cwiseMin(us);
      if (warm->y.size() == m) y = c_ * warm->y.cwiseQuotient(E_);
    }

    QpResult res;
    res.x = D_.cwiseProduct(x);
    res.y = VecX::Zero(m);
    double best_score = kInf;
    double best_feasible = kInf;

    VecX x_tilde(n), z_tilde(m), rhs(n), z_prev(m);
    std::vector<signed char> tried_set;
    bool done = false;
    int it = 0;
    for (it = 1; it <= settings_.max_iter; ++it) {
      rhs = sigma * x - qs;
      if (m > 0) rhs.noalias() += As_.transpose() * (rho * z - y);
      x_tilde.noalias() = K_inv_ * rhs;
      x = alpha * x_tilde + (1.0 - alpha) * x;
      if (m > 0) {
        z_tilde.noalias() = As_ * x_tilde;
        z_prev = z;
        const VecX z_relaxed = alpha * z_tilde + (1.0 - alpha) * z_prev;
        z = (z_relaxed + y / rho).cwiseMax(ls).cwiseMin(us);
        y += rho * (z_relaxed - z);
      }

      if (it % settings_.check_every != 0 && it != settings_.max_iter) continue;

      const VecX x_u = D_.cwiseProduct(x);
      const VecX y_u = m > 0 ? VecX(E_.cwiseProduct(y) / c_) : VecX();
      const auto [prim, dual] = residuals(q, x, z, y);
      const double score = std::max(prim, dual);
      if (score < best_score) {
        best_score = score;
        res.x = x_u;
        res.y = y_u;
        res.primal_residual = prim;
        res.dual_residual = dual;
      }
      if (settings_.record_trace) {
        if (prim <= settings_.tol) {
          best_feasible = std::min(best_feasible, 0.5 * x_u.dot(Q_ * x_u) + q.dot(x_u));
        }
        res.best_feasible_trace.push_back(best_feasible);
      }
      if (prim <= settings_.tol && dual <= settings_.tol) {
        res.converged = true;
        break;
      }
      if (settings_.polish && m > 0 && score <= settings_.polish_trigger) {
        QpResult cand;
        cand.x = x_u;
        cand.y = y_u;
        cand.primal_residual = prim;
        cand.dual_residual = dual;
        std::vector<signed char> set = active_set(lower, upper, cand);
        if (set != tried_set) {
          tried_set = std::move(set);
          polish(q, lower, upper, cand);
          if (cand.polished && cand.converged) {
            res.x = cand.x;
            res.y = cand.y;
            res.primal_residual = cand.primal_residual;
            res.dual_residual = cand.dual_residual;
            res.polished = res.converged = done = true;
            break;
          }
        }
      }
    }
    res.iterations = std::min(it, settings_.max_iter);

    if (settings_.polish && !done) polish(q, lower, upper, res);
    res.objective = 0.5 * res.x.dot(Q_ * res.x) + q.dot(res.x);
    return res;
  }

  QpResult solve(const DenseQp& qp, const QpWarmStart* warm = nullptr) const {
    return solve(qp.q, qp.lower, qp.upper, warm);
  }

 private:
  // Ruiz equilibration of the KKT matrix [Q A'; A 0], plus a cost scale.
  void equilibrate() {
    const Eigen::Index n = Q_.rows();
    const Eigen::Index m = A_.rows();
    D_ = VecX::Ones(n);
    E_ = VecX::Ones(m);
    Qs_ = Q_;
    As_ = A_;
    auto safe = [](double v) { return v < 1e-4 ? 1.0 : std::min(v, 1e4); };
    for (int k = 0; k < settings_.scaling_iters; ++k) {
      VecX dx(n), dz(m);
      for (Eigen::Index j = 0; j < n; ++j) {
        double nrm = Qs_.col(j).cwiseAbs().maxCoeff();
        if (m > 0) nrm = std::max(nrm, As_.col(j).cwiseAbs().maxCoeff());
        dx[j] = 1.0 / std::sqrt(safe(nrm));
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        dz[i] = 1.0 / std::sqrt(safe(As_.row(i).cwiseAbs().maxCoeff()));
      }
      Qs_ = dx.asDiagonal() * Qs_ * dx.asDiagonal();
      if (m > 0) As_ = dz.asDiagonal() * As_ * dx.asDiagonal();
      D_ = D_.cwiseProduct(dx);
      E_ = E_.cwiseProduct(dz);
    }
    double mean_col = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) mean_col += Qs_.col(j).cwiseAbs().maxCoeff();
    mean_col = n > 0 ? mean_col / static_cast<double>(n) : 1.0;
    c_ = 1.0 / safe(mean_col);
    Qs_ *= c_;
  }

  // Unscaled primal and dual residual infinity norms.
  std::pair<double, double> residuals(const VecX& q, const VecX& xs, const VecX& zs,
                                      const VecX& ys) const {
    const VecX x = D_.cwiseProduct(xs);
    double prim = 0.0;
    VecX grad = Q_ * x + q;
    if (A_.rows() > 0) {
      prim = (A_ * x - zs.cwiseQuotient(E_)).cwiseAbs().maxCoeff();
      grad.noalias() += A_.transpose() * (E_.cwiseProduct(ys) / c_);
    }
    const double dual = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
    return {prim, dual};
  }

  // Solve the KKT system restricted to the guessed active set; keep the
  // result only when it is primal feasible with correctly signed duals.
  // -1 active lower, +1 active upper, 0 inactive
  std::vector<signed char> active_set(const VecX& lower, const VecX& upper,
                                      const QpResult& res) const {
    const VecX ax = A_ * res.x;
    std::vector<signed char> set(static_cast<std::size_t>(A_.rows()), 0);
    for (Eigen::Index i = 0; i < A_.rows(); ++i) {
      if (std::isfinite(lower[i]) && ax[i] - lower[i] < -res.y[i]) {
        set[static_cast<std::size_t>(i)] = -1;
      } else if (std::isfinite(upper[i]) && upper[i] - ax[i] < res.y[i]) {
        set[static_cast<std::size_t>(i)] = 1;
      }
    }
    return set;
  }

  void polish(const VecX& q, const VecX& lower, const VecX& upper, QpResult& res) const {
    const Eigen::Index n = Q_.rows();
    const Eigen::Index m = A_.rows();
    const std::vector<signed char> set = active_set(lower, upper, res);
    std::vector<Eigen::Index> active;
    std::vector<double> bound;
    for (Eigen::Index i = 0; i < m; ++i) {
      const signed char s = set[static_cast<std::size_t>(i)];
      if (s == 0) continue;
      active.push_back(i);
      bound.push_back(s < 0 ? lower[i] : upper[i]);
    }
    const Eigen::Index na = static_cast<Eigen::Index>(active.size());
    MatX kkt = MatX::Zero(n + na, n + na);
    VecX rhs(n + na);
    kkt.topLeftCorner(n, n) = Q_;
    rhs.head(n) = -q;
    for (Eigen::Index k = 0; k < na; ++k) {
      kkt.block(n + k, 0, 1, n) = A_.row(active[k]);
      kkt.block(0, n + k, n, 1) = A_.row(active[k]).transpose();
      rhs[n + k] = bound[k];
    }
    Eigen::PartialPivLU<MatX> lu(kkt);
    VecX sol = lu.solve(rhs);
    for (int refine = 0; refine < 2; ++refine) sol += lu.solve(rhs - kkt * sol);
    if (!sol.allFinite()) return;

    VecX x = sol.head(n);
    VecX y = VecX::Zero(m);
    for (Eigen::Index k = 0; k < na; ++k) y[active[k]] = sol[n + k];

    const VecX ax_p = A_ * x;
    const double tol = settings_.tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (ax_p[i] < lower[i] - tol || ax_p[i] > upper[i] + tol) return;
    }
    for (Eigen::Index k = 0; k < na; ++k) {
      const Eigen::Index i = active[k];
      const bool is_lower = bound[k] == lower[i] && std::isfinite(lower[i]);
      const bool is_upper = bound[k] == upper[i] && std::isfinite(upper[i]);
      if (is_lower && !is_upper && y[i] > tol) return;
      if (is_upper && !is_lower && y[i] < -tol) return;
    }
    const double stat = (Q_ * x + q + A_.transpose() * y).cwiseAbs().maxCoeff();
    const double prim =
        m > 0 ? std::max(0.0, std::max((lower - ax_p).maxCoeff(), (ax_p - upper).maxCoeff())) : 0.0;
    if (std::max(stat, prim) > std::max(res.primal_residual, res.dual_residual) &&
        !(stat <= tol && prim <= tol)) {
      return;
    }
    res.x = x;
    res.y = y;
    res.primal_residual = prim;
    res.dual_residual = stat;
    res.polished = true;
    res.converged = res.converged || (prim <= tol && stat <= tol);
  }

  QpSettings settings_;
  MatX Q_, A_;
  MatX Qs_, As_;
  VecX D_, E_;
  double c_ = 1.0;
  MatX K_inv_;
};

inline QpResult solve_qp(const DenseQp& qp, const QpSettings& settings = {},
                         const QpWarmStart* warm = nullptr) {
  return QpSolver(qp.Q, qp.A, settings).solve(qp, warm);
}

}  // namespace interceptlab
