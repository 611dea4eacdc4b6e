#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "vimu/propagation.hpp"
#include "vimu/sim.hpp"

using namespace vimu;

namespace {

const Vec3 kGravity(0.0, 0.0, -9.81);

ImuArrayConfig random_array(std::mt19937_64& rng, int n, double lever) {
  ImuArrayConfig cfg;
  for (int i = 0; i < n; ++i) {
    ImuSpec s;
    s.id = "imu" + std::to_string(i);
    s.extrinsics.R_iV = Rot3(oracle::random_rotation(rng));
    s.extrinsics.p_Vi = oracle::random_vec(rng, lever);
    cfg.imus.push_back(s);
  }
  return cfg;
}

VimuState random_state(std::mt19937_64& rng) {
  VimuState x;
  x.q_GV = UnitQuaternion::from_rotation(oracle::random_rotation(rng));
  x.b_gV = oracle::random_vec(rng, 0.05);
  x.v_GV = oracle::random_vec(rng, 2.0);
  x.b_aV = oracle::random_vec(rng, 0.1);
  x.p_GV = oracle::random_vec(rng, 5.0);
  return x;
}

VirtualSample random_input(std::mt19937_64& rng) {
  return {0.0, oracle::random_vec(rng, 1.5), oracle::random_vec(rng, 6.0)};
}

}  // namespace

TEST(ContinuousDynamics, StationaryIsEquilibrium) {
  const FusionModel model = build_fusion(ImuArrayConfig::grid(3, 0.02));
  VimuState x;
  x.q_GV = UnitQuaternion::from_rotation(so3_exp(Vec3(0.1, -0.2, 0.3)));
  VirtualSample u;
  u.accel_mV = -x.R_GV().transpose() * kGravity;
  const StateDerivative d = f_continuous(x, u, model, kGravity);
  EXPECT_LT(d.q_dot.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(d.v_dot.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(d.p_dot, Vec3::Zero());
  EXPECT_EQ(d.b_g_dot, Vec3::Zero());
  EXPECT_EQ(d.b_a_dot, Vec3::Zero());
}

TEST(ContinuousDynamics, ZeroLeverArmsReduceToSingleImuForm) {
  std::mt19937_64 rng(3);
  ImuArrayConfig cfg = ImuArrayConfig::grid(2, 0.0);
  const FusionModel model = build_fusion(cfg);
  for (int trial = 0; trial < 20; ++trial) {
    const VimuState x = random_state(rng);
    const VirtualSample u = random_input(rng);
    const StateDerivative d = f_continuous(x, u, model, kGravity);
    const Vec3 expected = x.R_GV() * (u.accel_mV - x.b_aV) + kGravity;
    EXPECT_LT((d.v_dot - expected).norm(), 1e-13);
    EXPECT_TRUE(compute_s_a_hat(model, u.omega_mV, x.b_gV).isZero(0.0));
  }
}

TEST(CentripetalCorrection, VanishesForZeroBiasOrZeroLeverArms) {
  const FusionModel grid = build_fusion(ImuArrayConfig::grid(3, 0.02));
  EXPECT_TRUE(compute_s_a_hat(grid, Vec3(1, 2, 3), Vec3::Zero()).isZero(0.0));
  const FusionModel flat = build_fusion(ImuArrayConfig::grid(3, 0.0));
  EXPECT_TRUE(compute_s_a_hat(flat, Vec3(1, 2, 3), Vec3(0.1, 0.2, 0.3)).isZero(0.0));
}

TEST(CentripetalCorrection, MatchesDifferenceOfSquaredSkews) {
  std::mt19937_64 rng(11);
  const ImuArrayConfig cfg = random_array(rng, 4, 0.05);
  const FusionModel model = build_fusion(cfg);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 wm = oracle::random_vec(rng, 2.0);
    const Vec3 b = oracle::random_vec(rng, 0.01);
    const VecX got = compute_s_a_hat(model, wm, b);
    const Vec3 w = wm - b;
    for (int i = 0; i < 4; ++i) {
      const Mat3 Wm = oracle::cross_mat(wm), W = oracle::cross_mat(w);
      const Vec3 expected = model.R_iV[i] * ((Wm * Wm - W * W) * model.p_Vi[i]);
      // The quadratic bias term is kept, so the expansion is exact.
      EXPECT_LT((got.segment<3>(3 * i) - expected).norm(), 1e-15 + 1e-12 * expected.norm());
    }
  }
}

TEST(Jacobians, SingleImuHasNoExtraBlocks) {
  const FusionModel model = build_fusion(ImuArrayConfig::single());
  std::mt19937_64 rng(5);
  const VimuState x = random_state(rng);
  const VirtualSample u = random_input(rng);
  const JacobianPair J = compute_jacobians(x, u, model);
  EXPECT_TRUE((J.F.block<3, 3>(idx::kVel, idx::kBg).isZero(0.0)));
  EXPECT_TRUE((J.G.block<3, 3>(idx::kVel, idx::kNg).isZero(0.0)));

  // Classical single-IMU Jacobians.
  const Mat3 R = x.R_GV();
  const Vec3 w = u.omega_mV - x.b_gV;
  const Vec3 a = u.accel_mV - x.b_aV;
  Mat15 F = Mat15::Zero();
  F.block<3, 3>(0, 0) = -oracle::cross_mat(w);
  F.block<3, 3>(0, 3) = -Mat3::Identity();
  F.block<3, 3>(6, 0) = -R * oracle::cross_mat(a);
  F.block<3, 3>(6, 9) = -R;
  F.block<3, 3>(12, 6) = Mat3::Identity();
  Mat15x12 G = Mat15x12::Zero();
  G.block<3, 3>(0, 0) = -Mat3::Identity();
  G.block<3, 3>(3, 3) = Mat3::Identity();
  G.block<3, 3>(6, 6) = -R;
  G.block<3, 3>(9, 9) = Mat3::Identity();
  EXPECT_EQ(J.F, F);
  EXPECT_EQ(J.G, G);
}

TEST(Jacobians, MatchFiniteDifferencesOfTrueDynamics) {
  std::mt19937_64 rng(2024);
  double worst_F = 0.0, worst_block = 0.0, worst_G = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ImuArrayConfig cfg = random_array(rng, 3 + trial % 4, 0.05);
    const FusionModel model = build_fusion(cfg);
    const VimuState x = random_state(rng);
    const VirtualSample u = random_input(rng);
    const JacobianPair J = compute_jacobians(x, u, model);
    const oracle::FdJacobians fd = oracle::fd_jacobians(x, u, model, kGravity);

    worst_F = std::max(worst_F, oracle::rel_err(J.F, fd.F));
    const Mat3 block = J.F.template block<3, 3>(idx::kVel, idx::kBg);
    const Mat3 block_fd = fd.F.block<3, 3>(idx::kVel, idx::kBg);
    worst_block = std::max(worst_block, oracle::rel_err(block, block_fd));
    worst_G = std::max(worst_G, oracle::rel_err(J.G.block<15, 3>(0, idx::kNg), fd.G_ng));
    worst_G = std::max(worst_G, oracle::rel_err(J.G.block<15, 3>(0, idx::kNa), fd.G_na));
  }
  EXPECT_LT(worst_F, 1e-5);
  EXPECT_LT(worst_block, 1e-5);
  EXPECT_LT(worst_G, 1e-5);
}

namespace {

struct TruthStream {
  std::vector<VirtualSample> u;
  std::vector<TrueKinematics> truth;
};

// Noise-free fused stream sampled at t_first + k dt.
TruthStream truth_stream(const ImuArrayConfig& arr, const FusionModel& model,
                         const TrajectorySpec& traj, double t_first, double dt, int count) {
  TruthStream s;
  std::vector<ImuSample> samples(arr.size());
  for (int k = 0; k < count; ++k) {
    const double t = t_first + k * dt;
    const TrueKinematics kin = eval_trajectory(traj, t);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const ImuTruth tr = exact_imu_truth(kin, arr.imus[i].extrinsics, arr.gravity);
      samples[i] = {t, tr.omega, tr.specific_force};
    }
    s.u.push_back(fuse(model, samples));
    s.truth.push_back(kin);
  }
  return s;
}

VimuState state_from_truth(const TrueKinematics& kin) {
  VimuState x;
  x.q_GV = kin.q_GV;
  x.v_GV = kin.v_GV;
  x.p_GV = kin.p_GV;
  return x;
}

double final_position_error(double rate_hz) {
  const auto arr = ImuArrayConfig::grid(3, 0.02);
  const FusionModel model = build_fusion(arr);
  const VimuPropagator prop(model, arr.gravity);
  const double dt = 1.0 / rate_hz, t0 = 5.0;
  const int steps = static_cast<int>(std::lround(1.0 / dt));
  const TruthStream s = truth_stream(arr, model, TrajectorySpec::default_motion(), t0 - dt, dt, steps + 3);
  const auto traj = prop.predict_horizon(state_from_truth(s.truth[1]), {}, s.u, t0, 1.0, false);
  return (traj.back().x.p_GV - s.truth[static_cast<std::size_t>(steps + 1)].p_GV).norm();
}

}  // namespace

TEST(CentripetalCorrection, PsiMatchesDerivativeOfCorrection) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const FusionModel model = build_fusion(random_array(rng, 3 + trial % 5, 0.05));
    const Vec3 wm = oracle::random_vec(rng, 2.0);
    const Vec3 b = oracle::random_vec(rng, 0.05);
    const MatX psi = compute_psi(model, wm - b);
    const double h = 1e-6;
    MatX fd(psi.rows(), 3);
    for (int j = 0; j < 3; ++j) {
      Vec3 d = Vec3::Zero();
      d[j] = h;
      fd.col(j) = (compute_s_a_hat(model, wm, b + d) - compute_s_a_hat(model, wm, b - d)) / (2 * h);
    }
    EXPECT_LT(oracle::rel_err(psi, fd), 1e-6);
  }
}

TEST(Propagate, RejectsInvalidDt) {
  const VimuPropagator prop(build_fusion(ImuArrayConfig::single()), kGravity);
  const VimuState x;
  const ErrorCovariance P;
  for (double dt : {0.0, -0.01, 0.2, std::nan("")}) {
    try {
      prop.propagate(x, P, {}, {}, dt);
      FAIL() << "dt=" << dt;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidDt);
    }
  }
}

TEST(Propagate, TinyStepLeavesStateAndCovarianceUnchanged) {
  std::mt19937_64 rng(13);
  const FusionModel model = build_fusion(ImuArrayConfig::grid(3, 0.02));
  const VimuPropagator prop(model, kGravity);
  const VimuState x = random_state(rng);
  ErrorCovariance P;
  P.P = Mat15::Identity() * 1e-3;
  const VirtualSample u = random_input(rng);
  const auto out = prop.propagate(x, P, u, u, 1e-14);
  EXPECT_LT(local_error(x, out.x).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((out.P.P - P.P).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Propagate, StationaryDriftBelowNanometer) {
  const FusionModel model = build_fusion(ImuArrayConfig::grid(3, 0.02));
  const VimuPropagator prop(model, kGravity);
  VimuState x;
  x.q_GV = UnitQuaternion::from_rotation(so3_exp(Vec3(0.2, 0.1, -0.4)));
  VirtualSample u;
  u.accel_mV = -x.R_GV().transpose() * kGravity;
  ErrorCovariance P;
  const Vec3 p0 = x.p_GV;
  for (int k = 0; k < 200; ++k) {
    const auto r = prop.propagate(x, P, u, u, 0.005);
    x = r.x;
    P = r.P;
  }
  EXPECT_LT((x.p_GV - p0).norm(), 1e-9);
}

TEST(Propagate, CovarianceTraceNondecreasingAndPsd) {
  std::mt19937_64 rng(14);
  const FusionModel model = build_fusion(ImuArrayConfig::grid(3, 0.02));
  const VimuPropagator prop(model, kGravity);
  VimuState x = random_state(rng);
  ErrorCovariance P;
  const TrajectorySpec traj = TrajectorySpec::default_motion();
  const auto arr = ImuArrayConfig::grid(3, 0.02);
  const double dt = 0.005;
  const TruthStream s = truth_stream(arr, model, traj, 0.0, dt, 10001);
  x = state_from_truth(s.truth[0]);
  double prev_trace = 0.0, worst_norm = 0.0, worst_asym = 0.0, min_eig = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const auto r = prop.propagate(x, P, s.u[k], s.u[k + 1], dt);
    x = r.x;
    P = r.P;
    const double tr = P.P.trace();
    ASSERT_GE(tr, prev_trace) << "step " << k;
    prev_trace = tr;
    worst_norm = std::max(worst_norm, std::abs(x.q_GV.coeffs().norm() - 1.0));
    worst_asym = std::max(worst_asym, (P.P - P.P.transpose()).cwiseAbs().maxCoeff());
    if (k % 500 == 499) {
      min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat15>(P.P).eigenvalues().minCoeff() /
                                      P.P.diagonal().maxCoeff());
    }
  }
  EXPECT_LT(worst_norm, 1e-12);
  EXPECT_EQ(worst_asym, 0.0);
  EXPECT_GT(min_eig, -1e-12);
}

TEST(Propagate, ConstantYawRateMatchesAxisAngle) {
  const FusionModel model = build_fusion(ImuArrayConfig::grid(3, 0.02));
  const VimuPropagator prop(model, kGravity);
  const double wz = 0.9, dt = 0.005;
  VimuState x;
  VirtualSample u;
  u.omega_mV = Vec3(0, 0, wz);
  u.accel_mV = -kGravity;
  for (int k = 0; k < 200; ++k) x = prop.propagate(x, {}, u, u, dt).x;
  EXPECT_LT((oracle::log_map(x.R_GV()) - Vec3(0, 0, wz)).norm(), 1e-8);
  EXPECT_LT(x.p_GV.norm(), 1e-9);
}

TEST(PredictHorizon, NoiseFreeStreamTracksTruth) {
  EXPECT_LT(final_position_error(200.0), 1e-4);
}

TEST(PredictHorizon, FourthOrderConvergence) {
  const double e25 = final_position_error(25.0);
  const double e50 = final_position_error(50.0);
  const double e100 = final_position_error(100.0);
  EXPECT_NEAR(e25 / e50, 16.0, 4.0);
  EXPECT_NEAR(e50 / e100, 16.0, 4.0);
}

TEST(PredictHorizon, StreamExhausted) {
  const VimuPropagator prop(build_fusion(ImuArrayConfig::single()), kGravity);
  std::vector<VirtualSample> s(10);
  for (int k = 0; k < 10; ++k) s[k].t = 0.005 * k;
  EXPECT_NO_THROW(prop.predict_horizon({}, {}, s, 0.0, 0.045));
  for (double t0 : {0.0, 0.0025}) {
    try {
      prop.predict_horizon({}, {}, s, t0, t0 == 0.0 ? 0.1 : 0.01);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::StreamExhausted);
    }
  }
}

TEST(PredictHorizon, ColocatedArrayWithSharedSamplesEqualsSingleImu) {
  std::mt19937_64 rng(15);
  const auto single = ImuArrayConfig::single();
  auto triple = ImuArrayConfig::grid(1, 0.0);
  triple.imus = {single.imus[0], single.imus[0], single.imus[0]};
  for (int i = 0; i < 3; ++i) triple.imus[i].id = "imu" + std::to_string(i);
  const FusionModel m1 = build_fusion(single);
  const FusionModel m3 = build_fusion(triple);
  std::vector<VirtualSample> s1, s3;
  std::normal_distribution<double> nd;
  for (int k = 0; k < 400; ++k) {
    ImuSample x{0.005 * k, Vec3(0.1, -0.2, 0.3) + 0.01 * oracle::random_vec(rng, 1.0),
                Vec3(0.2, 0.1, 9.81) + 0.1 * oracle::random_vec(rng, 1.0)};
    const std::vector<ImuSample> same{x, x, x};
    s1.push_back(fuse(m1, std::span<const ImuSample>(&x, 1)));
    s3.push_back(fuse(m3, same));
  }
  const VimuPropagator p1(m1, kGravity), p3(m3, kGravity, ProcessNoiseSpec::from_model(m1));
  const auto a = p1.predict_horizon({}, {}, s1, 0.0, 1.5);
  const auto b = p3.predict_horizon({}, {}, s3, 0.0, 1.5);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_LT(local_error(a.back().x, b.back().x).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.back().P.P - b.back().P.P).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PredictHorizon, SingleImuMatchesReferenceImplementation) {
  const ImuNoiseParams noise;
  const auto arr = ImuArrayConfig::single(noise);
  const FusionModel model = build_fusion(arr);
  const VimuPropagator prop(model, arr.gravity);
  const double dt = 0.005;
  const int n = 2001;  // 10 s
  std::vector<VirtualSample> stream;
  std::vector<oracle::RefInput> ref_in;
  const TrajectorySpec traj = TrajectorySpec::default_motion();
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 + k * dt;
    const TrueKinematics kin = eval_trajectory(traj, t);
    const ImuTruth tr = exact_imu_truth(kin, arr.imus[0].extrinsics, arr.gravity);
    const Vec3 bg(0.002, -0.001, 0.003), ba(0.02, 0.01, -0.03);
    ImuSample raw{t, tr.omega + bg, tr.specific_force + ba};
    stream.push_back(fuse(model, std::span<const ImuSample>(&raw, 1)));
    ref_in.push_back({t, raw.omega_m, raw.accel_m});
  }
  VimuState x0 = state_from_truth(eval_trajectory(traj, 2.0));
  x0.b_gV = Vec3(0.001, 0.0, 0.002);
  x0.b_aV = Vec3(0.01, 0.0, -0.02);
  ErrorCovariance P0;
  P0.P.diagonal().setConstant(1e-4);

  const auto out = prop.predict_horizon(x0, P0, stream, 2.0, 10.0);
  oracle::SingleImuReference r0;
  r0.q = Eigen::Quaterniond(x0.q_GV.w(), x0.q_GV.x(), x0.q_GV.y(), x0.q_GV.z());
  r0.b_g = x0.b_gV;
  r0.v = x0.v_GV;
  r0.b_a = x0.b_aV;
  r0.p = x0.p_GV;
  r0.P = P0.P;
  const auto ref = oracle::single_imu_run(r0, ref_in, arr.gravity, noise);
  ASSERT_EQ(out.size(), ref.size());
  double worst_x = 0.0, worst_P = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const Mat3 Rref = ref[k].q.toRotationMatrix();
    worst_x = std::max(worst_x, (out[k].x.R_GV() - Rref).cwiseAbs().maxCoeff());
    worst_x = std::max(worst_x, (out[k].x.v_GV - ref[k].v).cwiseAbs().maxCoeff() / (1.0 + ref[k].v.norm()));
    worst_x = std::max(worst_x, (out[k].x.p_GV - ref[k].p).cwiseAbs().maxCoeff() / (1.0 + ref[k].p.norm()));
    worst_P = std::max(worst_P, oracle::rel_err(out[k].P.P, ref[k].P));
  }
  EXPECT_LT(worst_x, 1e-12);
  EXPECT_LT(worst_P, 1e-12);
}
