#include "vimu/fusion.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace vimu {

namespace {

void require_count(const FusionModel& model, std::size_t count, const char* what) {
  if (count != static_cast<std::size_t>(model.n_imus)) {
    throw Error(ErrorKind::CountMismatch, std::string(what) + ": expected " +
                                              std::to_string(model.n_imus) + " IMUs, got " +
                                              std::to_string(count));
  }
}

bool is_spd(const Mat3& Q) {
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * Q.cwiseAbs().maxCoeff()) return false;
  return Eigen::SelfAdjointEigenSolver<Mat3>(Q).eigenvalues().minCoeff() > 0.0;
}

MatX block_diag_sigma2(const ImuArrayConfig& array, double ImuNoiseParams::*field) {
  const Eigen::Index n = static_cast<Eigen::Index>(array.size());
  VecX d(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = array.imus[static_cast<std::size_t>(i)].noise.*field;
    d.segment<3>(3 * i).setConstant(s * s);
  }
  return d.asDiagonal();
}

Mat3 symmetrized(const MatX& Q) { return 0.5 * (Q + Q.transpose()); }

FusionModel geometry(const ImuArrayConfig& array) {
  array.validate();
  FusionModel m;
  m.n_imus = static_cast<int>(array.size());
  const Eigen::Index rows = 3 * m.n_imus;
  m.N.resize(rows, 3);
  m.Y.resize(rows, 3);
  m.colocated = true;
  for (int i = 0; i < m.n_imus; ++i) {
    const auto& ext = array.imus[static_cast<std::size_t>(i)].extrinsics;
    const Mat3& R = ext.R_iV.matrix();
    m.N.block<3, 3>(3 * i, 0) = R;
    m.Y.block<3, 3>(3 * i, 0) = R * skew(ext.p_Vi);
    m.R_iV.push_back(R);
    m.p_Vi.push_back(ext.p_Vi);
    if (!ext.p_Vi.isZero(0.0)) m.colocated = false;
  }
  if (m.colocated) {
    m.Z = MatX::Identity(rows, rows);
  } else {
    try {
      m.Z = left_nullspace(m.Y);
    } catch (const Error&) {
      throw Error(ErrorKind::DegenerateGeometry, "lever-arm matrix Y has no left nullspace");
    }
    if (numerical_rank(m.Z.transpose() * m.N) < 3) {
      throw Error(ErrorKind::DegenerateGeometry,
                  "Z^T N is rank deficient: specific force unobservable with this geometry");
    }
  }
  return m;
}

void finish(FusionModel& m, const ImuArrayConfig& array) {
  m.Q_gV = symmetrized(m.N_pinv * block_diag_sigma2(array, &ImuNoiseParams::sigma_g) * m.N_pinv.transpose());
  m.Q_wgV = symmetrized(m.N_pinv * block_diag_sigma2(array, &ImuNoiseParams::sigma_wg) * m.N_pinv.transpose());
  m.Q_aV = symmetrized(m.T * block_diag_sigma2(array, &ImuNoiseParams::sigma_a) * m.T.transpose());
  m.Q_waV = symmetrized(m.T * block_diag_sigma2(array, &ImuNoiseParams::sigma_wa) * m.T.transpose());
  for (const Mat3* Q : {&m.Q_gV, &m.Q_wgV, &m.Q_aV, &m.Q_waV}) {
    if (!is_spd(*Q)) throw Error(ErrorKind::DegenerateGeometry, "virtual noise covariance is not SPD");
  }
  for (int i = 0; i < m.n_imus; ++i) {
    m.gyro_blocks.push_back(m.N_pinv.block<3, 3>(0, 3 * i));
    m.accel_blocks.push_back(m.T.block<3, 3>(0, 3 * i));
  }
}

}  // namespace

FusionModel build_fusion(const ImuArrayConfig& array) {
  FusionModel m = geometry(array);
  m.N_pinv = pinv(m.N);
  m.T = m.colocated ? m.N_pinv : MatX(pinv(m.Z.transpose() * m.N) * m.Z.transpose());
  finish(m, array);
  return m;
}

FusionModel build_fusion_weighted(const ImuArrayConfig& array) {
  FusionModel m = geometry(array);
  m.weighted = true;

  const MatX Sg = block_diag_sigma2(array, &ImuNoiseParams::sigma_g);
  const MatX Wg = Sg.diagonal().cwiseInverse().asDiagonal();
  const MatX NtW = m.N.transpose() * Wg;
  m.N_pinv = (NtW * m.N).ldlt().solve(NtW);

  const MatX Sa = block_diag_sigma2(array, &ImuNoiseParams::sigma_a);
  if (m.colocated) {
    const MatX Wa = Sa.diagonal().cwiseInverse().asDiagonal();
    const MatX NtWa = m.N.transpose() * Wa;
    m.T = (NtWa * m.N).ldlt().solve(NtWa);
  } else {
    // T = (N^T Z M^{-1} Z^T N)^{-1} N^T Z M^{-1} Z^T with M = Z^T Sa Z.
    const MatX M = m.Z.transpose() * Sa * m.Z;
    const MatX H = (m.Z.transpose() * m.N).transpose() * M.ldlt().solve(m.Z.transpose());
    m.T = (H * m.N).ldlt().solve(H);
  }
  finish(m, array);
  return m;
}

Vec3 fuse_gyro(const FusionModel& model, std::span<const Vec3> omega_m) {
  require_count(model, omega_m.size(), "fuse_gyro");
  Vec3 out = Vec3::Zero();
  for (std::size_t i = 0; i < omega_m.size(); ++i) out += model.gyro_blocks[i] * omega_m[i];
  return out;
}

Vec3 fuse_accel(const FusionModel& model, std::span<const Vec3> accel_m, const Vec3& omega_mV) {
  require_count(model, accel_m.size(), "fuse_accel");
  if (model.colocated) {
    Vec3 out = Vec3::Zero();
    for (std::size_t i = 0; i < accel_m.size(); ++i) out += model.accel_blocks[i] * accel_m[i];
    return out;
  }
  const Mat3 W2 = skew(omega_mV) * skew(omega_mV);
  Vec3 out = Vec3::Zero();
  for (std::size_t i = 0; i < accel_m.size(); ++i) {
    out += model.accel_blocks[i] * (accel_m[i] - model.R_iV[i] * (W2 * model.p_Vi[i]));
  }
  return out;
}

VirtualSample fuse(const FusionModel& model, std::span<const ImuSample> samples) {
  require_count(model, samples.size(), "fuse");
  std::vector<Vec3> omega(samples.size()), accel(samples.size());
  const double t0 = samples.front().t;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (std::abs(samples[i].t - t0) > kAlignmentTolerance) {
      throw Error(ErrorKind::Misaligned, "sample timestamps differ by more than 1e-6 s");
    }
    omega[i] = samples[i].omega_m;
    accel[i] = samples[i].accel_m;
  }
  VirtualSample v;
  v.t = t0;
  v.omega_mV = fuse_gyro(model, omega);
  v.accel_mV = fuse_accel(model, accel, v.omega_mV);
  return v;
}

VirtualBiases fuse_biases(const FusionModel& model, std::span<const ImuBiases> biases) {
  require_count(model, biases.size(), "fuse_biases");
  VirtualBiases out;
  for (std::size_t i = 0; i < biases.size(); ++i) {
    out.b_gV += model.gyro_blocks[i] * biases[i].b_g;
    out.b_aV += model.accel_blocks[i] * biases[i].b_a;
  }
  return out;
}

VecX s_operator(const FusionModel& model, const Vec3& w) {
  const Mat3 W2 = skew(w) * skew(w);
  VecX out(3 * model.n_imus);
  for (int i = 0; i < model.n_imus; ++i) {
    out.segment<3>(3 * i) = model.R_iV[static_cast<std::size_t>(i)] * (W2 * model.p_Vi[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace vimu
