#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vimu/propagation.hpp"

namespace vimu {

struct SinusoidAxis {
  double amplitude = 0.0;
  double frequency_hz = 0.0;
  double phase_rad = 0.0;
};

/// Closed-form test trajectory. Position axes are offset + A sin(2 pi f t + phase);
/// orientation axes are Z-Y-X Euler angles (roll, pitch, yaw) of ^G R_V with
/// the same sinusoid form.
struct TrajectorySpec {
  std::array<SinusoidAxis, 3> position{};
  std::array<SinusoidAxis, 3> orientation{};
  Vec3 position_offset = Vec3::Zero();
  double duration_s = 60.0;

  void validate() const;
  /// Moderate 3-D motion with angular rates below 1 rad/s.
  static TrajectorySpec default_motion();
};

struct TrueKinematics {
  double t = 0.0;
  UnitQuaternion q_GV;
  Mat3 R_GV = Mat3::Identity();
  Vec3 p_GV = Vec3::Zero();
  Vec3 v_GV = Vec3::Zero();
  Vec3 a_GV = Vec3::Zero();
  Vec3 omega_V = Vec3::Zero();  // ^V omega
  Vec3 phi_V = Vec3::Zero();    // ^V omega_dot
};

/// Throws OutOfRange outside [0, duration].
TrueKinematics eval_trajectory(const TrajectorySpec& spec, double t);

struct ImuTruth {
  Vec3 omega = Vec3::Zero();
  Vec3 specific_force = Vec3::Zero();
};

/// Noise-free angular rate and specific force sensed by a rigidly attached
/// IMU: rotation by ^i R_V plus centripetal and Euler lever-arm terms.
ImuTruth exact_imu_truth(const TrueKinematics& kin, const ImuExtrinsics& ext, const Vec3& gravity);

/// Virtual-frame specific force ^V R_G (a - g).
Vec3 true_specific_force(const TrueKinematics& kin, const Vec3& gravity);

/// Rotates each sample into V and takes the arithmetic mean, ignoring lever
/// arms (the comparison baseline).
VirtualSample naive_average_baseline(std::span<const ImuSample> samples,
                                     std::span<const ImuExtrinsics> extrinsics);

/// Synthetic multi-IMU recording on the sample grid t0 + k dt, k = 0..count-1.
struct ArrayRecording {
  std::vector<double> t;
  /// samples[k][i]: sample k of IMU i.
  std::vector<std::vector<ImuSample>> samples;
  /// Per-IMU biases in effect for each sample.
  std::vector<std::vector<ImuBiases>> biases;
  std::vector<TrueKinematics> truth;
};

struct RecordingOptions {
  double t0 = 0.0;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::uint64_t run = 0;
  double initial_bias_g_std = 0.0;
  double initial_bias_a_std = 0.0;
  /// Scales the injected noise relative to the configured densities.
  double noise_scale = 1.0;
  bool noise_free = false;
};

ArrayRecording simulate_array(const ImuArrayConfig& array, const TrajectorySpec& trajectory,
                              const RecordingOptions& options);

enum class FusionMethod { Proposed, ProposedWeighted, NaiveAverage };

struct ExperimentConfig {
  ImuArrayConfig array;
  TrajectorySpec trajectory = TrajectorySpec::default_motion();
  std::vector<int> imu_counts{1, 2, 4, 6, 9};
  int trials = 1000;
  int starts_per_trial = 10;
  std::vector<double> horizons{0.1, 0.25, 0.5, 1.0, 2.0};
  std::uint64_t seed = 42;
  double initial_bias_g_std = 0.005;
  double initial_bias_a_std = 0.05;
  double noise_scale = 1.0;
  bool noise_free = false;
  FusionMethod method = FusionMethod::Proposed;
  /// 0 = use VIMU_THREADS or the hardware concurrency.
  int threads = 0;

  void validate() const;
  /// 3x3 planar grid, 2 cm pitch, 200 Hz, default noise densities.
  static ExperimentConfig defaults();
};

struct RmsRow {
  int imu_count = 0;
  double horizon_s = 0.0;
  double pos_rms_m = 0.0;
  double rot_rms_rad = 0.0;
  double vel_rms_mps = 0.0;
};

struct RmsReport {
  std::vector<RmsRow> rows;

  const RmsRow& at(int imu_count, double horizon_s) const;
};

/// Per-run squared errors, indexed [count][horizon], before aggregation.
struct RunErrors {
  std::vector<std::vector<double>> pos2, rot2, vel2;
};

/// Monte Carlo prediction study: each run starts from the exact state at a
/// random time, dead-reckons the fused stream, and records errors at each
/// horizon. Every IMU subset within a run sees the same noise realization.
RmsReport run_prediction_experiment(const ExperimentConfig& cfg);
/// Same as above, but returns the per-run errors as well.
RmsReport run_prediction_experiment(const ExperimentConfig& cfg, std::vector<RunErrors>* per_run);

struct NeesConfig {
  ExperimentConfig base = ExperimentConfig::defaults();
  int trials = 1000;
  std::vector<double> horizons{0.5};
  /// 0 = whole array.
  int imu_count = 0;
  /// Multiplies the injected noise while the filter keeps nominal Q_c.
  double noise_inflation = 1.0;
  double confidence = 0.95;
};

struct NeesRow {
  double horizon_s = 0.0;
  int trials = 0;
  double mean_nees = 0.0;
  /// Two-sided interval for the trial mean of a chi-square(15) statistic.
  double lower = 0.0;
  double upper = 0.0;
  bool consistent = false;
};

struct NeesReport {
  std::vector<NeesRow> rows;
};

NeesReport nees_consistency(const NeesConfig& cfg);

/// Interval [lo, hi] containing the mean of `trials` independent
/// chi-square(dof) draws with the given probability.
std::pair<double, double> chi_square_mean_interval(int dof, int trials, double confidence);

/// Worker count from VIMU_THREADS (if set and positive) or the hardware.
int default_thread_count();

}  // namespace vimu
