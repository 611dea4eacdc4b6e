#pragma once

#include <Eigen/Core>

#include "vimu/errors.hpp"

namespace vimu {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Relative singular-value threshold used by pinv() and left_nullspace().
inline constexpr double kRankTolerance = 1e-10;

/// Skew-symmetric (cross-product) matrix: skew(v) * w == v.cross(w).
///
/// Note the bilinear identity used throughout the fusion derivation is
/// skew(a) * b == -skew(b) * a. It is sometimes written with the factors
/// transposed as "a skew(b) = -b skew(a)"; the two are the same statement.
Mat3 skew(const Vec3& v);

/// Quaternion-rate matrix in storage order (x, y, z, w):
///
///   [ -skew(w)   w ]
///   [ -w^T       0 ]
///
/// which is the scalar-first form [0, -w^T; w, -skew(w)] with the scalar
/// moved to the last slot. q_dot = 0.5 * omega_matrix(w) * q.
Mat4 omega_matrix(const Vec3& w);

/// Rotation stored as a unit quaternion with components (x, y, z, w).
///
/// The quaternion of a state describes the body (virtual IMU) frame V
/// relative to the global frame G: to_rotation() returns ^G R_V, and its
/// transpose is ^V R_G. Numerically this is the JPL-convention quaternion of
/// ^V R_G (vector part first), which coincides with the Hamilton quaternion
/// of ^G R_V.
class UnitQuaternion {
 public:
  UnitQuaternion() : xyzw_(0.0, 0.0, 0.0, 1.0) {}

  /// Normalizes the raw 4-vector; throws InvalidArgument on a zero or
  /// non-finite input.
  static UnitQuaternion from_raw(const Vec4& xyzw);
  static UnitQuaternion identity() { return {}; }
  static UnitQuaternion from_rotation(const Mat3& R_GV);
  /// Quaternion of Exp(skew(rotvec)).
  static UnitQuaternion from_rotation_vector(const Vec3& rotvec);

  double x() const { return xyzw_[0]; }
  double y() const { return xyzw_[1]; }
  double z() const { return xyzw_[2]; }
  double w() const { return xyzw_[3]; }
  const Vec4& coeffs() const { return xyzw_; }

  /// ^G R_V.
  Mat3 to_rotation() const;

 private:
  explicit UnitQuaternion(const Vec4& xyzw) : xyzw_(xyzw) {}
  Vec4 xyzw_;
};

/// Proper rotation matrix; construction checks orthonormality and det = +1
/// within 1e-10.
class Rot3 {
 public:
  Rot3() : R_(Mat3::Identity()) {}
  explicit Rot3(const Mat3& R);

  static Rot3 identity() { return {}; }

  const Mat3& matrix() const { return R_; }
  Rot3 transpose() const;

 private:
  Mat3 R_;
};

bool is_rotation(const Mat3& R, double tol);
/// Closest rotation in the Frobenius sense (polar factor via SVD).
Mat3 orthonormalize(const Mat3& R);

Mat3 so3_exp(const Vec3& rotvec);
Vec3 so3_log(const Mat3& R);

/// Raw 4-vector 0.5 * Omega(w) * q.
Vec4 quat_derivative(const UnitQuaternion& q, const Vec3& w);

/// Number of singular values above kRankTolerance * largest.
Eigen::Index numerical_rank(const MatX& A);

/// Moore-Penrose inverse (A^T A)^{-1} A^T of a full-column-rank matrix.
/// Throws RankDeficient when the smallest singular value is below
/// kRankTolerance times the largest.
MatX pinv(const MatX& A);

/// Orthonormal basis Z of the left nullspace of Y (Z^T Y = 0), taken as the
/// trailing m - rank(Y) columns of a column-pivoted QR factorization.
/// Throws NoNullspace when Y has full row rank.
MatX left_nullspace(const MatX& Y);

}  // namespace vimu
