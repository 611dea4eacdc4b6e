#include "vimu/imu_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace vimu {

void ImuNoiseParams::validate() const {
  for (double s : {sigma_g, sigma_a, sigma_wg, sigma_wa}) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error(ErrorKind::ConfigInvalid, "noise densities must be finite and strictly positive");
    }
  }
}

ImuNoiseParams ImuNoiseParams::scaled(double factor) const {
  return {sigma_g * factor, sigma_a * factor, sigma_wg * factor, sigma_wa * factor};
}

void ImuArrayConfig::validate() const {
  if (imus.empty()) throw Error(ErrorKind::ConfigInvalid, "array needs at least one IMU");
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw Error(ErrorKind::ConfigInvalid, "rate_hz must be positive");
  }
  if (!gravity.allFinite()) throw Error(ErrorKind::ConfigInvalid, "gravity must be finite");
  std::set<std::string> ids;
  for (const auto& imu : imus) {
    if (!ids.insert(imu.id).second) {
      throw Error(ErrorKind::ConfigInvalid, "duplicate IMU id '" + imu.id + "'");
    }
    if (!imu.extrinsics.p_Vi.allFinite()) {
      throw Error(ErrorKind::ConfigInvalid, "lever arm of '" + imu.id + "' is not finite");
    }
    imu.noise.validate();
  }
}

ImuArrayConfig ImuArrayConfig::subset(std::span<const std::size_t> indices) const {
  ImuArrayConfig out;
  out.rate_hz = rate_hz;
  out.gravity = gravity;
  for (std::size_t i : indices) {
    if (i >= imus.size()) throw Error(ErrorKind::OutOfRange, "IMU index out of range");
    out.imus.push_back(imus[i]);
  }
  return out;
}

ImuArrayConfig ImuArrayConfig::grid(int n_per_side, double pitch_m, const ImuNoiseParams& noise) {
  ImuArrayConfig cfg;
  const double half = 0.5 * (n_per_side - 1);
  for (int r = 0; r < n_per_side; ++r) {
    for (int c = 0; c < n_per_side; ++c) {
      ImuSpec spec;
      spec.id = "imu" + std::to_string(r * n_per_side + c);
      spec.extrinsics.p_Vi = Vec3((c - half) * pitch_m, (half - r) * pitch_m, 0.0);
      spec.noise = noise;
      cfg.imus.push_back(spec);
    }
  }
  return cfg;
}

ImuArrayConfig ImuArrayConfig::single(const ImuNoiseParams& noise) {
  ImuArrayConfig cfg;
  cfg.imus.push_back({"imu0", {}, noise});
  return cfg;
}

std::vector<std::size_t> center_first_order(const ImuArrayConfig& array) {
  std::vector<std::size_t> order(array.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Lever arms on a regular grid produce exact ties up to rounding.
  auto dist = [&](std::size_t i) {
    return std::round(array.imus[i].extrinsics.p_Vi.norm() * 1e9);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });
  return order;
}

ImuSample measure(double t, const Vec3& true_omega, const Vec3& true_specific_force,
                  const ImuBiases& biases, const NoiseDraw& draw,
                  const ImuNoiseParams& params, double dt) {
  const double inv_sqrt_dt = 1.0 / std::sqrt(dt);
  ImuSample s;
  s.t = t;
  s.omega_m = true_omega + biases.b_g + params.sigma_g * inv_sqrt_dt * draw.gyro;
  s.accel_m = true_specific_force + biases.b_a + params.sigma_a * inv_sqrt_dt * draw.accel;
  return s;
}

ImuBiases step_bias(const ImuBiases& biases, const ImuNoiseParams& params, double dt,
                    const NoiseDraw& draw) {
  const double sqrt_dt = std::sqrt(dt);
  return {biases.b_g + params.sigma_wg * sqrt_dt * draw.gyro,
          biases.b_a + params.sigma_wa * sqrt_dt * draw.accel};
}

}  // namespace vimu
