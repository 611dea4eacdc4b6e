#include "vimu/so3.hpp"

#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace vimu {

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return S;
}

Mat4 omega_matrix(const Vec3& w) {
  Mat4 O;
  O.topLeftCorner<3, 3>() = -skew(w);
  O.topRightCorner<3, 1>() = w;
  O.bottomLeftCorner<1, 3>() = -w.transpose();
  O(3, 3) = 0.0;
  return O;
}

UnitQuaternion UnitQuaternion::from_raw(const Vec4& xyzw) {
  const double n = xyzw.norm();
  if (!std::isfinite(n) || n == 0.0) {
    throw Error(ErrorKind::InvalidArgument, "quaternion must be finite and nonzero");
  }
  return UnitQuaternion(xyzw / n);
}

UnitQuaternion UnitQuaternion::from_rotation(const Mat3& R_GV) {
  const Eigen::Quaterniond q(R_GV);
  return from_raw(q.coeffs());
}

UnitQuaternion UnitQuaternion::from_rotation_vector(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  Vec4 xyzw;
  if (angle < 1e-12) {
    xyzw << 0.5 * rotvec, 1.0;
  } else {
    xyzw << std::sin(0.5 * angle) * rotvec / angle, std::cos(0.5 * angle);
  }
  return from_raw(xyzw);
}

Mat3 UnitQuaternion::to_rotation() const {
  const Vec3 v = xyzw_.head<3>();
  const double w = xyzw_[3];
  return (2.0 * w * w - 1.0) * Mat3::Identity() + 2.0 * w * skew(v) + 2.0 * v * v.transpose();
}

Rot3::Rot3(const Mat3& R) : R_(R) {
  if (!is_rotation(R, 1e-10)) {
    throw Error(ErrorKind::InvalidArgument, "matrix is not a proper rotation");
  }
}

Rot3 Rot3::transpose() const { return Rot3(R_.transpose()); }

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) return false;
  const double orth = (R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  return orth <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Mat3 orthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  D(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * D * svd.matrixV().transpose();
}

Mat3 so3_exp(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  if (angle < 1e-8) {
    const Mat3 K = skew(rotvec);
    return Mat3::Identity() + K + 0.5 * K * K;
  }
  return Eigen::AngleAxisd(angle, rotvec / angle).toRotationMatrix();
}

Vec3 so3_log(const Mat3& R) {
  const Eigen::AngleAxisd aa(Eigen::Quaterniond(R).normalized());
  return aa.angle() * aa.axis();
}

Vec4 quat_derivative(const UnitQuaternion& q, const Vec3& w) {
  return 0.5 * omega_matrix(w) * q.coeffs();
}

Eigen::Index numerical_rank(const MatX& A) {
  if (A.size() == 0) return 0;
  const VecX sv = Eigen::JacobiSVD<MatX>(A).singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > kRankTolerance * sv[0]) ++r;
  }
  return r;
}

MatX pinv(const MatX& A) {
  const VecX sv = Eigen::JacobiSVD<MatX>(A).singularValues();
  if (A.rows() < A.cols() || sv.size() == 0 || sv[0] == 0.0 ||
      sv[sv.size() - 1] < kRankTolerance * sv[0]) {
    throw Error(ErrorKind::RankDeficient, "pinv requires a full-column-rank matrix");
  }
  const MatX AtA = A.transpose() * A;
  return AtA.ldlt().solve(A.transpose());
}

MatX left_nullspace(const MatX& Y) {
  const Eigen::Index m = Y.rows();
  const Eigen::Index r = numerical_rank(Y);
  if (r >= m) {
    throw Error(ErrorKind::NoNullspace, "matrix has full row rank");
  }
  if (r == 0) return MatX::Identity(m, m);
  Eigen::ColPivHouseholderQR<MatX> qr(Y);
  const MatX Q = qr.householderQ() * MatX::Identity(m, m);
  return Q.rightCols(m - r);
}

}  // namespace vimu
