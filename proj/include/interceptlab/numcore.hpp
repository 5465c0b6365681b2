#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

#include "interceptlab/errors.hpp"

namespace interceptlab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// Default eigenvalue floor applied before any covariance inversion.
inline constexpr double kPsdFloor = 1e-12;

inline bool all_finite(const Eigen::Ref<const MatX>& m) { return m.allFinite(); }

inline double inf_norm(const Eigen::Ref<const MatX>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool is_symmetric(const Eigen::Ref<const MatX>& m, double rel_tol = 1e-9) {
  if (m.rows() != m.cols()) return false;
  return inf_norm(m - m.transpose()) <= rel_tol * (1.0 + inf_norm(m));
}

// Symmetric part, used to scrub round-off after products like A P A^T.
template <typename Derived>
typename Derived::PlainObject symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return (0.5 * (m + m.transpose())).eval();
}

// Returns m with its eigenvalues clamped from below at `floor`.
inline MatX floor_eigenvalues(const Eigen::Ref<const MatX>& m, double floor) {
  if (!is_symmetric(m)) {
    throw ContractViolation("floor_eigenvalues: matrix is not symmetric");
  }
  const MatX sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatX> es(sym);
  if (es.info() != Eigen::Success) {
    throw ContractViolation("floor_eigenvalues: eigen decomposition failed");
  }
  VecX lambda = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
}

// Lower-triangular L with L L^T = m', where m' is m with eigenvalues floored
// at `floor`. Semidefinite inputs (floor 0) yield zero columns where the
// pivot vanishes.
inline MatX cholesky_psd(const Eigen::Ref<const MatX>& m, double floor = kPsdFloor) {
  if (m.rows() != m.cols()) {
    throw ContractViolation("cholesky_psd: matrix is not square");
  }
  const MatX a = floor_eigenvalues(m, floor);
  const Eigen::Index n = a.rows();
  MatX l = MatX::Zero(n, n);
  const double tiny = 1e-14 * (1.0 + inf_norm(a));
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (d <= tiny) continue;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

// True when m is symmetric and its smallest eigenvalue is >= -tol*(1+|m|).
inline bool is_psd(const Eigen::Ref<const MatX>& m, double tol = 1e-9) {
  if (!is_symmetric(m) || !all_finite(m)) return false;
  Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol * (1.0 + inf_norm(m));
}

inline Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

inline Mat3 rot_y(double b) {
  const double c = std::cos(b), s = std::sin(b);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

inline Mat3 rot_z(double g) {
  const double c = std::cos(g), s = std::sin(g);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

// Proper rotation. Construction validates orthonormality and det = +1.
class Rotation3 {
 public:
  static constexpr double kTolerance = 1e-9;

  Rotation3() : m_(Mat3::Identity()) {}

  explicit Rotation3(const Mat3& m) : m_(m) {
    if (!m.allFinite() ||
        (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() > kTolerance ||
        std::abs(m.determinant() - 1.0) > kTolerance) {
      throw ContractViolation("Rotation3: matrix is not a proper rotation");
    }
  }

  // Z-Y-X (yaw, pitch, roll) composition: R = Rz(yaw) Ry(pitch) Rx(roll).
  static Rotation3 from_ypr(double yaw, double pitch, double roll) {
    return Rotation3(rot_z(yaw) * rot_y(pitch) * rot_x(roll));
  }

  const Mat3& matrix() const { return m_; }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rotation3 operator*(const Rotation3& o) const { return Rotation3(m_ * o.m_, Unchecked{}); }
  Rotation3 inverse() const { return Rotation3(m_.transpose(), Unchecked{}); }

 private:
  struct Unchecked {};
  Rotation3(const Mat3& m, Unchecked) : m_(m) {}
  Mat3 m_;
};

// Derivatives of the elementary axis rotations evaluated at zero angle.
struct AxisRotationDerivatives {
  Mat3 d_alpha;  // d Rx / d alpha
  Mat3 d_beta;   // d Ry / d beta
  Mat3 d_gamma;  // d Rz / d gamma
};

inline AxisRotationDerivatives rot_axis_derivatives() {
  AxisRotationDerivatives d;
  d.d_alpha << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  d.d_beta << 0, 0, 1, 0, 0, 0, -1, 0, 0;
  d.d_gamma << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  return d;
}

inline Vec3 clamp_box(const Vec3& v, const Vec3& limit) {
  return v.cwiseMax(-limit).cwiseMin(limit);
}

inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}

}  // namespace interceptlab
