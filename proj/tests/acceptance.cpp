// Acceptance suite: one PASS/FAIL line per criterion. Exit code is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "vimu/io.hpp"

using namespace vimu;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int failures = 0;

void run(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs > limit_s) {
    o.pass = false;
    o.detail += "; runtime over " + fmt("%.0f", limit_s) + " s";
  }
  if (!o.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

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

Outcome noise_reduction() {
  const ImuNoiseParams noise;
  const double s2 = noise.sigma_g * noise.sigma_g;
  ImuArrayConfig pair;
  for (double x : {-0.02, 0.02}) {
    ImuSpec s;
    s.id = x < 0 ? "left" : "right";
    s.extrinsics.p_Vi = Vec3(x, 0.0, 0.0);
    pair.imus.push_back(s);
  }
  const double e2 = (build_fusion(pair).Q_gV - 0.5 * s2 * Mat3::Identity()).cwiseAbs().maxCoeff();
  const double e9 =
      (build_fusion(ImuArrayConfig::grid(3, 0.02)).Q_gV - s2 / 9.0 * Mat3::Identity()).cwiseAbs().maxCoeff();
  return {e2 <= 1e-12 && e9 <= 1e-12, "max |Q_gV - sigma^2/n I|: n=2 " + fmt("%.1e", e2) + ", n=9 " + fmt("%.1e", e9)};
}

Outcome marginalization() {
  std::mt19937_64 rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ImuArrayConfig arr = random_array(rng, 3 + trial % 7, 0.05);
    const FusionModel m = build_fusion(arr);
    const Vec3 w = oracle::random_vec(rng, 2.0);
    const Vec3 phi = oracle::random_vec(rng, 10.0);
    const Vec3 s = oracle::random_vec(rng, 5.0);
    std::vector<ImuSample> samples;
    for (const auto& imu : arr.imus) {
      const Mat3& R = imu.extrinsics.R_iV.matrix();
      samples.push_back({0.0, R * w, oracle::lever_arm_accel(R, s, w, phi, imu.extrinsics.p_Vi)});
    }
    worst = std::max(worst, oracle::rel_err(fuse(m, samples).accel_mV, s, 1.0));
  }

  // Spin scenario: 3x3 grid at 5 cm pitch, virtual frame shifted 5 cm off
  // the array center, 10 rad/s about z, no linear motion.
  auto arr = ImuArrayConfig::grid(3, 0.05);
  for (auto& imu : arr.imus) imu.extrinsics.p_Vi += Vec3(0.05, 0.0, 0.0);
  const Vec3 w(0.0, 0.0, 10.0);
  std::vector<ImuSample> samples;
  std::vector<ImuExtrinsics> ext;
  for (const auto& imu : arr.imus) {
    samples.push_back({0.0, w, oracle::lever_arm_accel(Mat3::Identity(), Vec3::Zero(), w, Vec3::Zero(),
                                                       imu.extrinsics.p_Vi)});
    ext.push_back(imu.extrinsics);
  }
  const double naive_err = naive_average_baseline(samples, ext).accel_mV.norm();
  const double fused_err = fuse(build_fusion(arr), samples).accel_mV.norm();
  return {worst <= 1e-10 && naive_err > 1e-3 && fused_err <= 1e-10,
          "fused rel err " + fmt("%.1e", worst) + " over 100 states; spin: naive err " + fmt("%.3g", naive_err) +
              " m/s^2, fused " + fmt("%.1e", fused_err)};
}

Outcome jacobians() {
  std::mt19937_64 rng(2025);
  const Vec3 g(0.0, 0.0, -9.81);
  double worst_F = 0.0, worst_G = 0.0, worst_psi = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const FusionModel model = build_fusion(random_array(rng, 3 + trial % 4, 0.05));
    VimuState x;
    x.q_GV = UnitQuaternion::from_rotation(oracle::random_rotation(rng));
    x.b_gV = oracle::random_vec(rng, 0.05);
    x.v_GV = oracle::random_vec(rng, 2.0);
    x.b_aV = oracle::random_vec(rng, 0.1);
    x.p_GV = oracle::random_vec(rng, 5.0);
    const VirtualSample u{0.0, oracle::random_vec(rng, 1.5), oracle::random_vec(rng, 6.0)};

    const JacobianPair J = compute_jacobians(x, u, model);
    const oracle::FdJacobians fd = oracle::fd_jacobians(x, u, model, g);
    worst_F = std::max(worst_F, oracle::rel_err(J.F, fd.F));
    worst_G = std::max(worst_G, oracle::rel_err(J.G.block<15, 3>(0, idx::kNg), fd.G_ng));
    worst_G = std::max(worst_G, oracle::rel_err(J.G.block<15, 3>(0, idx::kNa), fd.G_na));

    const MatX psi = compute_psi(model, u.omega_mV - x.b_gV);
    MatX psi_fd(psi.rows(), 3);
    const double h = 1e-6;
    for (int j = 0; j < 3; ++j) {
      Vec3 d = Vec3::Zero();
      d[j] = h;
      psi_fd.col(j) = (compute_s_a_hat(model, u.omega_mV, x.b_gV + d) -
                       compute_s_a_hat(model, u.omega_mV, x.b_gV - d)) / (2.0 * h);
    }
    worst_psi = std::max(worst_psi, oracle::rel_err(psi, psi_fd));
  }
  return {worst_F <= 1e-5 && worst_G <= 1e-5 && worst_psi <= 1e-6,
          "max rel err F " + fmt("%.1e", worst_F) + ", G " + fmt("%.1e", worst_G) + ", Psi " + fmt("%.1e", worst_psi)};
}

Outcome trend(RmsReport& report_out) {
  ExperimentConfig cfg = ExperimentConfig::defaults();
  cfg.threads = 1;
  report_out = run_prediction_experiment(cfg);
  int violations = 0;
  for (double h : cfg.horizons) {
    for (std::size_t c = 1; c < cfg.imu_counts.size(); ++c) {
      const RmsRow& a = report_out.at(cfg.imu_counts[c - 1], h);
      const RmsRow& b = report_out.at(cfg.imu_counts[c], h);
      violations += b.pos_rms_m > a.pos_rms_m;
      violations += b.rot_rms_rad > a.rot_rms_rad;
      violations += b.vel_rms_mps > a.vel_rms_mps;
    }
  }
  double worst_dev = 0.0, lo = 1.0, hi = 0.0;
  for (double h : cfg.horizons) {
    const double r = report_out.at(9, h).rot_rms_rad / report_out.at(1, h).rot_rms_rad;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    worst_dev = std::max(worst_dev, std::abs(r * 3.0 - 1.0));
  }
  return {violations == 0 && worst_dev <= 0.2,
          std::to_string(violations) + " monotonicity violations; rot RMS ratio 9/1 in [" + fmt("%.3f", lo) + ", " +
              fmt("%.3f", hi) + "], worst deviation from 1/3 " + fmt("%.1f", 100.0 * worst_dev) + "%"};
}

Outcome single_imu() {
  const ImuNoiseParams noise;
  const auto arr = ImuArrayConfig::single(noise);
  const FusionModel model = build_fusion(arr);

  std::mt19937_64 rng(77);
  bool bit_exact = true;
  for (int k = 0; k < 1000; ++k) {
    ImuSample s{0.005 * k, oracle::random_vec(rng, 2.0), oracle::random_vec(rng, 20.0)};
    const VirtualSample v = fuse(model, std::span<const ImuSample>(&s, 1));
    bit_exact = bit_exact && v.t == s.t && v.omega_mV == s.omega_m && v.accel_mV == s.accel_m;
  }
  VimuState xr;
  xr.q_GV = UnitQuaternion::from_rotation(oracle::random_rotation(rng));
  xr.b_gV = oracle::random_vec(rng, 0.05);
  const JacobianPair J = compute_jacobians(xr, {0.0, oracle::random_vec(rng, 1.5), oracle::random_vec(rng, 6.0)},
                                           model);
  const bool zero_blocks = J.F.block<3, 3>(idx::kVel, idx::kBg).isZero(0.0) &&
                           J.G.block<3, 3>(idx::kVel, idx::kNg).isZero(0.0);

  const VimuPropagator prop(model, arr.gravity);
  const TrajectorySpec traj = TrajectorySpec::default_motion();
  const double dt = arr.dt(), t0 = 2.0;
  std::vector<VirtualSample> stream;
  std::vector<oracle::RefInput> ref_in;
  const Vec3 bg(0.002, -0.001, 0.003), ba(0.02, 0.01, -0.03);
  for (int k = 0; k <= 2000; ++k) {
    const double t = t0 + k * dt;
    const ImuTruth tr = exact_imu_truth(eval_trajectory(traj, t), arr.imus[0].extrinsics, arr.gravity);
    ImuSample raw{t, tr.omega + bg, tr.specific_force + ba};
    stream.push_back(fuse(model, std::span<const ImuSample>(&raw, 1)));
    ref_in.push_back({t, raw.omega_m, raw.accel_m});
  }
  const TrueKinematics k0 = eval_trajectory(traj, t0);
  VimuState x0;
  x0.q_GV = k0.q_GV;
  x0.v_GV = k0.v_GV;
  x0.p_GV = k0.p_GV;
  x0.b_gV = Vec3(0.001, 0.0, 0.002);
  x0.b_aV = Vec3(0.01, 0.0, -0.02);
  ErrorCovariance P0;
  P0.P.diagonal().setConstant(1e-4);
  const auto out = prop.predict_horizon(x0, P0, stream, t0, 10.0);

  oracle::SingleImuReference r0;
  r0.q = Eigen::Quaterniond(x0.q_GV.w(), x0.q_GV.x(), x0.q_GV.y(), x0.q_GV.z());
  r0.b_g = x0.b_gV;
  r0.v = x0.v_GV;
  r0.b_a = x0.b_aV;
  r0.p = x0.p_GV;
  r0.P = P0.P;
  const auto ref = oracle::single_imu_run(r0, ref_in, arr.gravity, noise);
  double worst = out.size() == ref.size() ? 0.0 : INFINITY;
  for (std::size_t k = 0; k < std::min(out.size(), ref.size()); ++k) {
    worst = std::max(worst, (out[k].x.R_GV() - ref[k].q.toRotationMatrix()).cwiseAbs().maxCoeff());
    worst = std::max(worst, (out[k].x.v_GV - ref[k].v).cwiseAbs().maxCoeff() / (1.0 + ref[k].v.norm()));
    worst = std::max(worst, (out[k].x.p_GV - ref[k].p).cwiseAbs().maxCoeff() / (1.0 + ref[k].p.norm()));
    worst = std::max(worst, oracle::rel_err(out[k].P.P, ref[k].P));
  }
  return {bit_exact && zero_blocks && worst <= 1e-12,
          std::string("fused samples ") + (bit_exact ? "bit-identical" : "DIFFER") + ", extra Jacobian blocks " +
              (zero_blocks ? "zero" : "NONZERO") + ", 10 s propagation vs reference " + fmt("%.1e", worst)};
}

Outcome nees() {
  // 95% band for the 1000-trial mean of chi-square(15) NEES samples.
  constexpr double kLower = 13.2, kUpper = 16.9;
  NeesConfig cfg;
  cfg.trials = 1000;
  cfg.horizons = {0.5};
  const NeesRow nominal = nees_consistency(cfg).rows.at(0);
  cfg.noise_inflation = 4.0;
  const NeesRow inflated = nees_consistency(cfg).rows.at(0);
  const bool ok = nominal.mean_nees >= kLower && nominal.mean_nees <= kUpper &&
                  (inflated.mean_nees < kLower || inflated.mean_nees > kUpper) && !inflated.consistent;
  return {ok, "mean NEES " + fmt("%.2f", nominal.mean_nees) + " in [13.2, 16.9]; 4x inflation " +
                  fmt("%.1f", inflated.mean_nees) + (inflated.consistent ? " not flagged" : " flagged")};
}

std::string experiment_csv(int threads) {
  ExperimentConfig cfg = ExperimentConfig::defaults();
  cfg.seed = 7;
  cfg.trials = 100;
  cfg.threads = threads;
  std::ostringstream ss;
  write_rms_csv(ss, run_prediction_experiment(cfg));
  return ss.str();
}

Outcome determinism() {
  const std::string a = experiment_csv(1), b = experiment_csv(1), c = experiment_csv(8);
  return {a == b && a == c && !a.empty(), std::string("repeat run ") + (a == b ? "identical" : "DIFFERS") +
                                              ", 1 vs 8 threads " + (a == c ? "identical" : "DIFFERS") + " (" +
                                              std::to_string(a.size()) + " bytes)"};
}

}  // namespace

int main() {
  RmsReport report;
  run(1, "noise covariance reduction", 1.0, noise_reduction);
  run(2, "marginalization exactness", 5.0, marginalization);
  run(3, "Jacobian fidelity", 10.0, jacobians);
  run(4, "RMS trend across IMU counts", 300.0, [&] { return trend(report); });
  run(5, "single-IMU reduction", 60.0, single_imu);
  run(6, "covariance consistency", 120.0, nees);
  run(7, "experiment determinism", 300.0, determinism);
  std::printf("%d of 7 criteria failed\n", failures);
  return failures;
}
