#pragma once

#include <span>
#include <vector>

#include "vimu/fusion.hpp"

namespace vimu {

using Vec15 = Eigen::Matrix<double, 15, 1>;
using Mat15 = Eigen::Matrix<double, 15, 15>;
using Mat15x12 = Eigen::Matrix<double, 15, 12>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

/// Offsets of the blocks in the 15-dim error state and 12-dim noise vector.
namespace idx {
inline constexpr int kTheta = 0;
inline constexpr int kBg = 3;
inline constexpr int kVel = 6;
inline constexpr int kBa = 9;
inline constexpr int kPos = 12;

inline constexpr int kNg = 0;
inline constexpr int kNwg = 3;
inline constexpr int kNa = 6;
inline constexpr int kNwa = 9;
}  // namespace idx

/// Nominal virtual-IMU state, ordered (q, b_g, v, b_a, p).
struct VimuState {
  UnitQuaternion q_GV;
  Vec3 b_gV = Vec3::Zero();
  Vec3 v_GV = Vec3::Zero();
  Vec3 b_aV = Vec3::Zero();
  Vec3 p_GV = Vec3::Zero();

  Mat3 R_GV() const { return q_GV.to_rotation(); }
};

/// Covariance of the error state (theta, b_g, v, b_a, p). The attitude error
/// is the local angle with ^V R_G = (I - skew(theta)) ^V R_G_hat, i.e.
/// ^G R_V = ^G R_V_hat Exp(theta); all other components are additive.
struct ErrorCovariance {
  Mat15 P = Mat15::Zero();

  void resymmetrize() { P = (0.5 * (P + P.transpose())).eval(); }
};

/// Continuous white-noise covariance of n_V = (n_g, n_wg, n_a, n_wa).
struct ProcessNoiseSpec {
  Mat12 Q_c = Mat12::Zero();

  static ProcessNoiseSpec from_model(const FusionModel& model);
};

struct JacobianPair {
  Mat15 F = Mat15::Zero();
  Mat15x12 G = Mat15x12::Zero();
};

struct StateDerivative {
  Vec4 q_dot = Vec4::Zero();
  Vec3 b_g_dot = Vec3::Zero();
  Vec3 v_dot = Vec3::Zero();
  Vec3 b_a_dot = Vec3::Zero();
  Vec3 p_dot = Vec3::Zero();
};

/// Nominal dynamics driven by a virtual sample:
///   q_dot = 0.5 Omega(omega_hat) q,   omega_hat = omega_mV - b_gV
///   v_dot = ^G R_V a_hat + g,         a_hat = a_mV - b_aV + T S_a_hat
///   p_dot = v, bias derivatives zero.
StateDerivative f_continuous(const VimuState& x, const VirtualSample& u, const FusionModel& model,
                             const Vec3& gravity);

/// Stacked ^i R_V zeta_hat ^V p_i with
/// zeta_hat = -skew(b)^2 + skew(w_m) skew(b) + skew(b) skew(w_m).
VecX compute_s_a_hat(const FusionModel& model, const Vec3& omega_mV, const Vec3& b_gV_hat);

/// Sensitivity of the stacked centripetal correction to the gyro bias (and
/// equally to gyro noise): block i is
/// ^i R_V (-skew(w) skew(p_i) - skew(skew(w) p_i)), w = omega_mV - b_gV_hat.
MatX compute_psi(const FusionModel& model, const Vec3& omega_hat);

JacobianPair compute_jacobians(const VimuState& x, const VirtualSample& u, const FusionModel& model);

/// x [+] dx: ^G R_V <- ^G R_V Exp(theta), everything else additive.
VimuState retract(const VimuState& x, const Vec15& dx);
/// Error of an estimate relative to the truth, such that
/// retract(estimate, local_error(truth, estimate)) == truth.
Vec15 local_error(const VimuState& truth, const VimuState& estimate);

struct PropagationResult {
  VimuState x;
  ErrorCovariance P;
};

struct TrajectoryPoint {
  double t = 0.0;
  VimuState x;
  ErrorCovariance P;
};

/// Strapdown propagation of the virtual IMU for one array configuration.
///
/// State: RK4 over [t, t + dt] with the measurement interpolated between the
/// bracketing samples, then quaternion renormalization. Covariance:
/// P <- Phi P Phi^T + Qd with Phi the 3rd-order series of expm(F dt) and
/// Qd = 0.5 (Phi G Qc G^T Phi^T + G Qc G^T) dt.
class VimuPropagator {
 public:
  VimuPropagator(FusionModel model, const Vec3& gravity);
  VimuPropagator(FusionModel model, const Vec3& gravity, const ProcessNoiseSpec& noise);

  const FusionModel& model() const { return model_; }
  const Vec3& gravity() const { return gravity_; }
  const ProcessNoiseSpec& noise() const { return noise_; }

  /// One step with the input linearly interpolated between u0 and u1.
  /// Throws InvalidDt unless 0 < dt <= 0.1.
  PropagationResult propagate(const VimuState& x, const ErrorCovariance& P, const VirtualSample& u0,
                              const VirtualSample& u1, double dt) const;

  /// Repeated propagation over the stream from time t0 until t0 + horizon.
  /// Samples before t0 and after the horizon are used as interpolation
  /// neighbors when present: the mid-step input then comes from a 4-point
  /// cubic instead of the linear interpolant. Returns the initial point
  /// followed by one point per step.
  std::vector<TrajectoryPoint> predict_horizon(const VimuState& x0, const ErrorCovariance& P0,
                                               std::span<const VirtualSample> stream, double t0,
                                               double horizon, bool with_covariance = true) const;

 private:
  VimuState step_state(const VimuState& x, const VirtualSample& u0, const VirtualSample& umid,
                       const VirtualSample& u1, double dt) const;
  ErrorCovariance step_covariance(const VimuState& x, const ErrorCovariance& P,
                                  const VirtualSample& u0, double dt) const;

  FusionModel model_;
  Vec3 gravity_;
  ProcessNoiseSpec noise_;
};

}  // namespace vimu
