#pragma once

#include <span>
#include <vector>

#include "vimu/imu_model.hpp"

namespace vimu {

/// Fixed linear maps from stacked real-IMU measurements to a virtual IMU,
/// computed once per array geometry.
///
///   N      (3n x 3)        stacked ^i R_V
///   N_pinv (3 x 3n)        gyro map; (N^T N)^{-1} N^T, or its
///                          1/sigma^2-weighted form
///   Y      (3n x 3)        stacked ^i R_V skew(^V p_i); multiplies the
///                          unknown angular acceleration in the accel model
///   Z      (3n x (3n-r))   orthonormal left nullspace of Y
///   T      (3 x 3n)        specific-force map (Z^T N)^+ Z^T; satisfies
///                          T N = I and T Y = 0
///
/// Instances are never mutated after construction.
struct FusionModel {
  int n_imus = 0;
  bool weighted = false;
  /// All lever arms zero: Y = 0 and T falls back to the gyro map.
  bool colocated = false;

  MatX N, N_pinv, Y, Z, T;

  Mat3 Q_gV = Mat3::Zero();
  Mat3 Q_wgV = Mat3::Zero();
  Mat3 Q_aV = Mat3::Zero();
  Mat3 Q_waV = Mat3::Zero();

  std::vector<Mat3> R_iV;
  std::vector<Vec3> p_Vi;
  // 3x3 column blocks of N_pinv and T, one per IMU.
  std::vector<Mat3> gyro_blocks;
  std::vector<Mat3> accel_blocks;
};

struct VirtualSample {
  double t = 0.0;
  Vec3 omega_mV = Vec3::Zero();
  Vec3 accel_mV = Vec3::Zero();
};

struct VirtualBiases {
  Vec3 b_gV = Vec3::Zero();
  Vec3 b_aV = Vec3::Zero();
};

/// Least-squares fusion assuming equal-weight IMUs; the Q matrices still
/// account for each IMU's own noise density.
FusionModel build_fusion(const ImuArrayConfig& array);

/// Weighted least squares with W = diag(1/sigma_i^2). The accelerometer
/// weights enter after nullspace projection, i.e. the projected residual
/// Z^T(a - N s) is whitened by (Z^T Sigma_a Z)^{-1}.
FusionModel build_fusion_weighted(const ImuArrayConfig& array);

/// Timestamp tolerance for "synchronized" samples.
inline constexpr double kAlignmentTolerance = 1e-6;

Vec3 fuse_gyro(const FusionModel& model, std::span<const Vec3> omega_m);
Vec3 fuse_accel(const FusionModel& model, std::span<const Vec3> accel_m, const Vec3& omega_mV);
/// Fuses one synchronized set of samples (one per IMU, in array order).
VirtualSample fuse(const FusionModel& model, std::span<const ImuSample> samples);
VirtualBiases fuse_biases(const FusionModel& model, std::span<const ImuBiases> biases);

/// Stacked centripetal operator: block i is ^i R_V skew(w)^2 ^V p_i.
VecX s_operator(const FusionModel& model, const Vec3& w);

}  // namespace vimu
