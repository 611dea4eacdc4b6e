#include "vimu/propagation.hpp"

#include <cmath>

namespace vimu {

namespace {

using Vec16 = Eigen::Matrix<double, 16, 1>;

// Raw state layout used inside the integrator: q(4) b_g(3) v(3) b_a(3) p(3).
Vec16 pack(const VimuState& x) {
  Vec16 s;
  s << x.q_GV.coeffs(), x.b_gV, x.v_GV, x.b_aV, x.p_GV;
  return s;
}

VimuState unpack(const Vec16& s) {
  VimuState x;
  x.q_GV = UnitQuaternion::from_raw(s.segment<4>(0));
  x.b_gV = s.segment<3>(4);
  x.v_GV = s.segment<3>(7);
  x.b_aV = s.segment<3>(10);
  x.p_GV = s.segment<3>(13);
  return x;
}

// T * S_a_hat without materializing the stacked vector.
Vec3 t_s_a_hat(const FusionModel& model, const Vec3& omega_mV, const Vec3& b_hat) {
  if (model.colocated || b_hat.isZero(0.0)) return Vec3::Zero();
  const Mat3 Wm = skew(omega_mV);
  const Mat3 B = skew(b_hat);
  const Mat3 zeta = -B * B + Wm * B + B * Wm;
  Vec3 out = Vec3::Zero();
  for (std::size_t i = 0; i < model.R_iV.size(); ++i) {
    out += model.accel_blocks[i] * (model.R_iV[i] * (zeta * model.p_Vi[i]));
  }
  return out;
}

// T * Psi.
Mat3 t_psi(const FusionModel& model, const Vec3& omega_hat) {
  Mat3 out = Mat3::Zero();
  if (model.colocated) return out;
  const Mat3 W = skew(omega_hat);
  for (std::size_t i = 0; i < model.R_iV.size(); ++i) {
    const Vec3& p = model.p_Vi[i];
    out += model.accel_blocks[i] * (model.R_iV[i] * (-W * skew(p) - skew(W * p)));
  }
  return out;
}

Vec16 f_raw(const Vec16& s, const VirtualSample& u, const FusionModel& model, const Vec3& gravity) {
  const Vec4 q = s.segment<4>(0);
  const Vec3 b_g = s.segment<3>(4);
  const Vec3 v = s.segment<3>(7);
  const Vec3 b_a = s.segment<3>(10);

  const Vec3 omega_hat = u.omega_mV - b_g;
  const Vec3 a_hat = u.accel_mV - b_a + t_s_a_hat(model, u.omega_mV, b_g);
  const Mat3 R = UnitQuaternion::from_raw(q).to_rotation();

  Vec16 d = Vec16::Zero();
  d.segment<4>(0) = 0.5 * omega_matrix(omega_hat) * q;
  d.segment<3>(7) = R * a_hat + gravity;
  d.segment<3>(13) = v;
  return d;
}

VirtualSample lerp(const VirtualSample& a, const VirtualSample& b, double s) {
  return {a.t + s * (b.t - a.t), a.omega_mV + s * (b.omega_mV - a.omega_mV),
          a.accel_mV + s * (b.accel_mV - a.accel_mV)};
}

// Midpoint of [u0, u1] from the cubic through four equally spaced samples.
VirtualSample cubic_mid(const VirtualSample& um, const VirtualSample& u0, const VirtualSample& u1,
                        const VirtualSample& u2) {
  constexpr double a = -1.0 / 16.0;
  constexpr double b = 9.0 / 16.0;
  return {0.5 * (u0.t + u1.t), a * um.omega_mV + b * u0.omega_mV + b * u1.omega_mV + a * u2.omega_mV,
          a * um.accel_mV + b * u0.accel_mV + b * u1.accel_mV + a * u2.accel_mV};
}

}  // namespace

ProcessNoiseSpec ProcessNoiseSpec::from_model(const FusionModel& model) {
  ProcessNoiseSpec spec;
  spec.Q_c.block<3, 3>(idx::kNg, idx::kNg) = model.Q_gV;
  spec.Q_c.block<3, 3>(idx::kNwg, idx::kNwg) = model.Q_wgV;
  spec.Q_c.block<3, 3>(idx::kNa, idx::kNa) = model.Q_aV;
  spec.Q_c.block<3, 3>(idx::kNwa, idx::kNwa) = model.Q_waV;
  return spec;
}

StateDerivative f_continuous(const VimuState& x, const VirtualSample& u, const FusionModel& model,
                             const Vec3& gravity) {
  const Vec16 d = f_raw(pack(x), u, model, gravity);
  StateDerivative out;
  out.q_dot = d.segment<4>(0);
  out.v_dot = d.segment<3>(7);
  out.p_dot = d.segment<3>(13);
  return out;
}

VecX compute_s_a_hat(const FusionModel& model, const Vec3& omega_mV, const Vec3& b_gV_hat) {
  const Mat3 Wm = skew(omega_mV);
  const Mat3 B = skew(b_gV_hat);
  const Mat3 zeta = -B * B + Wm * B + B * Wm;
  VecX out(3 * model.n_imus);
  for (int i = 0; i < model.n_imus; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.segment<3>(3 * i) = model.R_iV[k] * (zeta * model.p_Vi[k]);
  }
  return out;
}

MatX compute_psi(const FusionModel& model, const Vec3& omega_hat) {
  const Mat3 W = skew(omega_hat);
  MatX psi(3 * model.n_imus, 3);
  for (int i = 0; i < model.n_imus; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Vec3& p = model.p_Vi[k];
    psi.block<3, 3>(3 * i, 0) = model.R_iV[k] * (-W * skew(p) - skew(W * p));
  }
  return psi;
}

JacobianPair compute_jacobians(const VimuState& x, const VirtualSample& u, const FusionModel& model) {
  using namespace idx;
  const Vec3 omega_hat = u.omega_mV - x.b_gV;
  const Vec3 a_hat = u.accel_mV - x.b_aV + t_s_a_hat(model, u.omega_mV, x.b_gV);
  const Mat3 R = x.R_GV();  // ^V R_G^T
  const Mat3 I = Mat3::Identity();

  JacobianPair J;
  J.F.block<3, 3>(kTheta, kTheta) = -skew(omega_hat);
  J.F.block<3, 3>(kTheta, kBg) = -I;
  J.F.block<3, 3>(kVel, kTheta) = -R * skew(a_hat);
  J.F.block<3, 3>(kVel, kBa) = -R;
  J.F.block<3, 3>(kPos, kVel) = I;

  J.G.block<3, 3>(kTheta, kNg) = -I;
  J.G.block<3, 3>(kBg, kNwg) = I;
  J.G.block<3, 3>(kVel, kNa) = -R;
  J.G.block<3, 3>(kBa, kNwa) = I;

  if (!model.colocated) {
    // Psi == Xi: gyro noise enters the centripetal correction exactly like
    // the gyro-bias error. The true specific force is a_hat - b_a_err - n_a
    // + T (S_a_hat + Psi b_g_err + Xi n_g), so both blocks carry a plus sign.
    const Mat3 RTPsi = R * t_psi(model, omega_hat);
    J.F.block<3, 3>(kVel, kBg) = RTPsi;
    J.G.block<3, 3>(kVel, kNg) = RTPsi;
  }
  return J;
}

VimuState retract(const VimuState& x, const Vec15& dx) {
  VimuState out = x;
  out.q_GV = UnitQuaternion::from_rotation(x.R_GV() * so3_exp(dx.segment<3>(idx::kTheta)));
  out.b_gV += dx.segment<3>(idx::kBg);
  out.v_GV += dx.segment<3>(idx::kVel);
  out.b_aV += dx.segment<3>(idx::kBa);
  out.p_GV += dx.segment<3>(idx::kPos);
  return out;
}

Vec15 local_error(const VimuState& truth, const VimuState& estimate) {
  Vec15 e;
  e.segment<3>(idx::kTheta) = so3_log(estimate.R_GV().transpose() * truth.R_GV());
  e.segment<3>(idx::kBg) = truth.b_gV - estimate.b_gV;
  e.segment<3>(idx::kVel) = truth.v_GV - estimate.v_GV;
  e.segment<3>(idx::kBa) = truth.b_aV - estimate.b_aV;
  e.segment<3>(idx::kPos) = truth.p_GV - estimate.p_GV;
  return e;
}

VimuPropagator::VimuPropagator(FusionModel model, const Vec3& gravity)
    : model_(std::move(model)), gravity_(gravity), noise_(ProcessNoiseSpec::from_model(model_)) {}

VimuPropagator::VimuPropagator(FusionModel model, const Vec3& gravity, const ProcessNoiseSpec& noise)
    : model_(std::move(model)), gravity_(gravity), noise_(noise) {}

VimuState VimuPropagator::step_state(const VimuState& x, const VirtualSample& u0,
                                     const VirtualSample& umid, const VirtualSample& u1,
                                     double dt) const {
  const Vec16 s = pack(x);
  const Vec16 k1 = f_raw(s, u0, model_, gravity_);
  const Vec16 k2 = f_raw(s + 0.5 * dt * k1, umid, model_, gravity_);
  const Vec16 k3 = f_raw(s + 0.5 * dt * k2, umid, model_, gravity_);
  const Vec16 k4 = f_raw(s + dt * k3, u1, model_, gravity_);
  return unpack(s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

ErrorCovariance VimuPropagator::step_covariance(const VimuState& x, const ErrorCovariance& P,
                                                const VirtualSample& u0, double dt) const {
  const JacobianPair J = compute_jacobians(x, u0, model_);
  const Mat15 Fdt = J.F * dt;
  const Mat15 Fdt2 = Fdt * Fdt;
  const Mat15 Phi = Mat15::Identity() + Fdt + 0.5 * Fdt2 + (1.0 / 6.0) * Fdt2 * Fdt;
  const Mat15 GQG = J.G * noise_.Q_c * J.G.transpose();
  ErrorCovariance out;
  out.P = Phi * P.P * Phi.transpose() + 0.5 * (Phi * GQG * Phi.transpose() + GQG) * dt;
  out.resymmetrize();
  return out;
}

PropagationResult VimuPropagator::propagate(const VimuState& x, const ErrorCovariance& P,
                                            const VirtualSample& u0, const VirtualSample& u1,
                                            double dt) const {
  if (!(dt > 0.0) || dt > 0.1) throw Error(ErrorKind::InvalidDt, "dt must lie in (0, 0.1] s");
  return {step_state(x, u0, lerp(u0, u1, 0.5), u1, dt), step_covariance(x, P, u0, dt)};
}

std::vector<TrajectoryPoint> VimuPropagator::predict_horizon(const VimuState& x0,
                                                             const ErrorCovariance& P0,
                                                             std::span<const VirtualSample> stream,
                                                             double t0, double horizon,
                                                             bool with_covariance) const {
  if (!(horizon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be nonnegative");
  std::size_t k = 0;
  while (k < stream.size() && stream[k].t < t0 - kAlignmentTolerance) ++k;
  if (k == stream.size() || std::abs(stream[k].t - t0) > kAlignmentTolerance) {
    throw Error(ErrorKind::StreamExhausted, "stream has no sample at the start time");
  }

  std::vector<TrajectoryPoint> out;
  out.push_back({stream[k].t, x0, P0});
  const double t_end = t0 + horizon;
  constexpr double kSpacingTol = 1e-9;
  while (stream[k].t < t_end - kAlignmentTolerance) {
    if (k + 1 >= stream.size()) {
      throw Error(ErrorKind::StreamExhausted, "stream ends before the requested horizon");
    }
    const VirtualSample& u0 = stream[k];
    const VirtualSample& u1 = stream[k + 1];
    const double dt = u1.t - u0.t;
    if (!(dt > 0.0) || dt > 0.1) throw Error(ErrorKind::InvalidDt, "stream timestamps must increase by at most 0.1 s");

    VirtualSample umid = lerp(u0, u1, 0.5);
    if (k >= 1 && k + 2 < stream.size() &&
        std::abs((u0.t - stream[k - 1].t) - dt) < kSpacingTol &&
        std::abs((stream[k + 2].t - u1.t) - dt) < kSpacingTol) {
      umid = cubic_mid(stream[k - 1], u0, u1, stream[k + 2]);
    }

    const TrajectoryPoint& prev = out.back();
    TrajectoryPoint next;
    next.t = u1.t;
    next.x = step_state(prev.x, u0, umid, u1, dt);
    if (with_covariance) next.P = step_covariance(prev.x, prev.P, u0, dt);
    out.push_back(next);
    ++k;
  }
  return out;
}

}  // namespace vimu
