#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vimu/so3.hpp"

namespace vimu {

/// Continuous-time noise densities of one IMU.
struct ImuNoiseParams {
  double sigma_g = 1.7e-4;   // rad/s/sqrt(Hz)
  double sigma_a = 2e-3;     // m/s^2/sqrt(Hz)
  double sigma_wg = 1e-5;    // rad/s^2/sqrt(Hz)
  double sigma_wa = 1e-4;    // m/s^3/sqrt(Hz)

  void validate() const;
  ImuNoiseParams scaled(double factor) const;
};

/// Pose of IMU i relative to the virtual frame V.
struct ImuExtrinsics {
  Rot3 R_iV;               // ^i R_V
  Vec3 p_Vi = Vec3::Zero();  // ^V p_i, meters
};

struct ImuSample {
  double t = 0.0;
  Vec3 omega_m = Vec3::Zero();
  Vec3 accel_m = Vec3::Zero();
};

struct ImuBiases {
  Vec3 b_g = Vec3::Zero();
  Vec3 b_a = Vec3::Zero();
};

/// Standard-normal draws for one sample (gyro, accel).
struct NoiseDraw {
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

struct ImuSpec {
  std::string id;
  ImuExtrinsics extrinsics;
  ImuNoiseParams noise;
};

struct ImuArrayConfig {
  std::vector<ImuSpec> imus;
  double rate_hz = 200.0;
  Vec3 gravity{0.0, 0.0, -9.81};

  void validate() const;
  std::size_t size() const { return imus.size(); }
  double dt() const { return 1.0 / rate_hz; }
  /// Copy restricted to the given IMU indices, in the given order.
  ImuArrayConfig subset(std::span<const std::size_t> indices) const;

  /// Axis-aligned n x n planar grid in the x-y plane, centered on the
  /// virtual frame.
  static ImuArrayConfig grid(int n_per_side, double pitch_m, const ImuNoiseParams& noise = {});
  /// Single IMU at identity extrinsics.
  static ImuArrayConfig single(const ImuNoiseParams& noise = {});
};

/// Deterministic subset order: IMUs sorted by distance of their lever arm
/// from the virtual-frame origin (center first, then rings), ties broken by
/// configuration order.
std::vector<std::size_t> center_first_order(const ImuArrayConfig& array);

/// Discrete measurement synthesis. Per-sample noise std is sigma / sqrt(dt).
ImuSample measure(double t, const Vec3& true_omega, const Vec3& true_specific_force,
                  const ImuBiases& biases, const NoiseDraw& draw,
                  const ImuNoiseParams& params, double dt);

/// Random-walk step: b += sigma_w * sqrt(dt) * n.
ImuBiases step_bias(const ImuBiases& biases, const ImuNoiseParams& params, double dt,
                    const NoiseDraw& draw);

}  // namespace vimu
